#!/usr/bin/env python3
"""Time generate / classify / save / load on growing synthetic graphs.

    python3 scripts/scale_benchmark.py --users 10000 100000
"""
import argparse
import logging
import tempfile
import time

from expandclassify.features import CategorizerConfig, DEFAULT_ODDS
from expandclassify.graphcut import classify
from expandclassify.model import FixedOddsModel, LinkEnergyParams
from expandclassify.snapshot import load_snapshot, save_snapshot
from expandclassify.synthnet import DEFAULT_TERMS, SynthConfig, generate


def timed(fn, *a):
    t0 = time.perf_counter()
    out = fn(*a)
    return out, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--avg-degree", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    model = FixedOddsModel(CategorizerConfig(t2=DEFAULT_TERMS), DEFAULT_ODDS)
    params = LinkEnergyParams()
    print(f"{'users':>8} {'edges':>9} {'generate':>9} {'classify':>9} {'save':>7} {'load':>7}")
    for n in args.users:
        n_in = max(n // 100, 2)
        n_out = n - n_in
        cfg = SynthConfig(n_in=n_in, n_out=n_out, p_in=min(1.0, 10.0 / n_in), p_out=args.avg_degree / n,
                          hub_count=0, posts_per_user=1, seed=args.seed)
        world, t_gen = timed(generate, cfg)
        snap = world.snapshot
        _, t_cls = timed(classify, snap, model, params)
        with tempfile.TemporaryDirectory() as d:
            _, t_save = timed(save_snapshot, snap, d)
            _, t_load = timed(load_snapshot, d)
        print(f"{len(snap.users):8d} {len(snap.edges):9d} {t_gen:8.1f}s {t_cls:8.1f}s {t_save:6.1f}s {t_load:6.1f}s")


if __name__ == "__main__":
    main()
