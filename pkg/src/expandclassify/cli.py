"""Command-line entry points.

Exit codes: 0 success, 1 usage or config error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from datetime import date

from .config import ConfigError, load_config, parse_number
from .engine import classify_snapshot, evaluate_auc, run
from .evaluation import AXES, sweep, term_frequencies
from .graphcut import GraphError
from .metrics import EvaluationError, roc_auc
from .model import LinearModel, ModelError
from .snapshot import SnapshotFormatError, load_snapshot, save_snapshot
from .synthnet import as_data_source, generate
from .trainer import TrainingError, save_model

log = logging.getLogger("expandclassify")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _params_dict(p):
    return {"gamma": p.gamma, "alpha1": p.alpha1, "alpha2": p.alpha2, "lambda": p.lam}


def _write_labels(path, result):
    rows = [[u, lab, repr(result.local_probabilities[u])] for u, lab in result.labels.items()]
    _write_csv(path, ["user_id", "label", "probability"], rows)


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _snapshot(args):
    if not args.snapshot:
        raise UsageError("--snapshot is required for this command")
    if not os.path.isdir(args.snapshot):
        raise DataError(f"snapshot directory not found: {args.snapshot}")
    try:
        return load_snapshot(args.snapshot)
    except OSError as exc:
        raise DataError(str(exc)) from None


def cmd_generate(args, cfg):
    world = generate(cfg.synthetic or _default_synth(cfg))
    out = args.snapshot or os.path.join(_out_dir(args), "snapshot")
    save_snapshot(world.snapshot, out)
    _write_csv(os.path.join(os.path.dirname(os.path.abspath(out)), "membership.csv"), ["user_id", "in_location"],
               sorted(world.membership.items()))
    print(f"wrote {len(world.snapshot.users)} users, {len(world.snapshot.edges)} edges to {out}")


def _default_synth(cfg):
    from .synthnet import SynthConfig

    return SynthConfig(seed=cfg.seed)


def cmd_run(args, cfg):
    if args.snapshot:
        source = as_data_source(_snapshot(args))
    else:
        source = as_data_source(generate(cfg.synthetic or _default_synth(cfg)))
    try:
        res = run(source, cfg.location, cfg.link, cfg.setup, seed_queries=cfg.seed_queries, seed_ids=cfg.seed_ids,
                  max_iterations=cfg.max_iterations, max_seconds=cfg.max_seconds, budget=cfg.budget, seed=cfg.seed)
    except RuntimeError as exc:
        raise DataError(str(exc)) from None
    out = _out_dir(args)
    save_snapshot(res.snapshot, os.path.join(out, "snapshot"))
    _write_labels(os.path.join(out, "labels.csv"), res.result)
    if isinstance(res.model, LinearModel):
        save_model(res.model, os.path.join(out, "model.json"))
    final = res.history[-1]
    _write_json(os.path.join(out, "metrics.json"), {
        "auc": final["auc"],
        "users": final["users"],
        "edges": final["edges"],
        "classified_in_location": final["classified_in_location"],
        "params": _params_dict(cfg.link),
        "seed": cfg.seed,
        "history": res.history,
    })
    print(f"{final['users']} users, {final['classified_in_location']} classified in location, AUC={final['auc']}")


def cmd_classify(args, cfg):
    snap = _snapshot(args)
    model, info, result = classify_snapshot(snap, cfg.setup, cfg.link)
    out = _out_dir(args)
    _write_labels(os.path.join(out, "labels.csv"), result)
    if isinstance(model, LinearModel):
        save_model(model, os.path.join(out, "model.json"))
    _write_json(os.path.join(out, "metrics.json"), {
        "users": len(result.labels),
        "classified_in_location": int(sum(result.labels.values())),
        "energy": result.energy,
        "auc": evaluate_auc(snap, result.local_probabilities),
        "params": _params_dict(cfg.link),
        **info,
    })
    print(f"{sum(result.labels.values())} of {len(result.labels)} users classified in location")


def cmd_eval(args, cfg):
    snap = _snapshot(args)
    model, info, result = classify_snapshot(snap, cfg.setup, cfg.link)
    rep = roc_auc(result.local_probabilities, snap.ground_truth)
    out = _out_dir(args)
    _write_csv(os.path.join(out, "roc.csv"), ["threshold", "fpr", "tpr"],
               [[repr(t), repr(f), repr(p)] for t, f, p in rep.points])
    _write_json(os.path.join(out, "metrics.json"), {
        "auc": rep.auc,
        "positives": rep.positives,
        "negatives": rep.negatives,
        "params": _params_dict(cfg.link),
        **info,
    })
    print(f"AUC={rep.auc:.4f} ({rep.positives} positives, {rep.negatives} negatives)")


def cmd_sweep(args, cfg):
    snap = _snapshot(args)
    try:
        values = [parse_number(v) for v in args.values.split(",") if v.strip()]
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    if not values:
        raise UsageError("--values needs at least one value")
    report = sweep(snap, cfg.setup, cfg.link, args.axis, values)
    _write_csv(os.path.join(_out_dir(args), "sweep.csv"), ["axis", "value", "auc", "status"], report.as_csv_rows())
    for r in report.rows:
        print(f"{r.axis}={r.value:.6g} AUC={r.auc if r.auc is None else round(r.auc, 4)} {r.status}")
    print(f"baseline gamma=0 AUC={report.baseline_auc}")


def cmd_freq(args, cfg):
    snap = _snapshot(args)
    try:
        start = date.fromisoformat(args.date_from) if args.date_from else None
        end = date.fromisoformat(args.date_to) if args.date_to else None
    except ValueError as exc:
        raise UsageError(f"bad date: {exc}") from None
    stop = []
    if args.stopwords:
        with open(args.stopwords, encoding="utf-8") as fh:
            stop = fh.read().split()
    users = set(snap.users)
    if args.in_location:
        users = {u for u, lab in snap.labels.items() if lab == 1}
    posts = [p for u, plist in snap.posts.items() if u in users for p in plist]
    freq = term_frequencies(posts, start, end, stop, args.top)
    _write_csv(os.path.join(_out_dir(args), "freq.csv"), ["term", "count"], freq)
    for term, n in freq:
        print(f"{n:8d}  {term}")


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "classify": cmd_classify,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "freq": cmd_freq,
}


def _common(default) -> argparse.ArgumentParser:
    # sub-commands re-declare the global flags with SUPPRESS so they do not
    # clobber values given before the sub-command name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="JSON config file")
    common.add_argument("--snapshot", default=default, help="snapshot directory")
    common.add_argument("--seed", type=int, default=default, help="random seed (overrides the config)")
    common.add_argument("--out", default=default, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(argparse.SUPPRESS)

    p = _Parser(prog="expandclassify", description="Location-specific user set collection by expand-classify.",
                parents=[_common(None)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("generate", parents=[common], help="generate a synthetic network snapshot")
    sub.add_parser("run", parents=[common], help="run the expand-classify loop")
    sub.add_parser("classify", parents=[common], help="classify a snapshot once")
    sub.add_parser("eval", parents=[common], help="ROC/AUC on geo-labeled users")
    sp = sub.add_parser("sweep", parents=[common], help="parameter sensitivity sweep")
    sp.add_argument("--axis", choices=AXES, required=True)
    sp.add_argument("--values", required=True, help="comma separated, e.g. 0,log(2),log(5)")
    fp = sub.add_parser("freq", parents=[common], help="term frequencies of posts")
    fp.add_argument("--from", dest="date_from")
    fp.add_argument("--to", dest="date_to")
    fp.add_argument("--top", type=int, default=50)
    fp.add_argument("--stopwords", help="whitespace separated stopword file")
    fp.add_argument("--in-location", action="store_true", help="only users labeled 1 in the snapshot")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SnapshotFormatError, EvaluationError, GraphError, TrainingError, ModelError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
