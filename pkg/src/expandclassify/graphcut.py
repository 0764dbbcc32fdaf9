"""Energy Graph construction and exact MAP labeling by minimum s-t cut.

Profile energies are re-centered per user as ``phi(x,1) = max(0, -delta)``
and ``phi(x,0) = max(0, delta)``. This adds a per-user constant to the energy,
so the minimizing labeling is unchanged and all capacities stay nonnegative.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit

from .maxflow import max_flow
from .model import LinkEnergyParams, ModelError, ProfileEnergyModel, UserId, link_energy_table


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyInputs:
    """Per-user deltas and per-edge degree data in array form."""

    user_ids: tuple
    deltas: np.ndarray
    tails: np.ndarray
    heads: np.ndarray
    z1: np.ndarray
    z2: np.ndarray

    @property
    def index(self) -> Dict[UserId, int]:
        return {u: i for i, u in enumerate(self.user_ids)}

    def psi(self, params: LinkEnergyParams) -> np.ndarray:
        return link_energy_table(self.z1, self.z2, params)


def energy_inputs(snapshot, profile_model: Optional[ProfileEnergyModel] = None, deltas=None) -> EnergyInputs:
    """Collect deltas and edge arrays from a snapshot (``users`` dict + ``edges`` list)."""
    ids = tuple(snapshot.users)
    if deltas is None:
        deltas = profile_model.deltas(list(snapshot.users.values()))
    deltas = np.asarray(deltas, dtype=float)
    if len(deltas) != len(ids):
        raise GraphError("one delta per user is required")
    index = {u: i for i, u in enumerate(ids)}
    m = len(snapshot.edges)
    tails = np.empty(m, np.int64)
    heads = np.empty(m, np.int64)
    z1 = np.empty(m, float)
    z2 = np.empty(m, float)
    try:
        for k, e in enumerate(snapshot.edges):
            tails[k] = index[e.follower]
            heads[k] = index[e.friend]
            z1[k] = np.nan if e.z1 is None else e.z1
            z2[k] = np.nan if e.z2 is None else e.z2
    except KeyError as exc:
        raise GraphError(f"edge endpoint {exc.args[0]!r} is not a known user") from None
    return EnergyInputs(ids, deltas, tails, heads, z1, z2)


@dataclass(frozen=True)
class EnergyGraph:
    """Nodes: users 0..n-1, source ``n``, sink ``n+1``."""

    user_ids: tuple
    source_caps: np.ndarray  # (s, u_i)
    sink_caps: np.ndarray  # (u_i, t)
    tails: np.ndarray
    heads: np.ndarray
    fwd_caps: np.ndarray  # (u_tail, u_head)
    bwd_caps: np.ndarray  # (u_head, u_tail)

    @property
    def n_nodes(self) -> int:
        return len(self.user_ids) + 2


def build_energy_graph(user_ids: Sequence[UserId], deltas, tails, heads, psi) -> EnergyGraph:
    """Energy Graph from per-user deltas and per-edge ``psi`` rows (psi10, psi01, psi00).

    ``tails``/``heads`` are user indices of each observed relationship.
    """
    user_ids = tuple(user_ids)
    n = len(user_ids)
    if len(set(user_ids)) != n:
        raise GraphError("duplicate user id")
    deltas = np.asarray(deltas, dtype=float)
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    psi = np.asarray(psi, dtype=float).reshape(-1, 3)
    if len(deltas) != n:
        raise GraphError("one delta per user is required")
    if len(tails) and (tails.min() < 0 or heads.min() < 0 or max(tails.max(), heads.max()) >= n):
        raise GraphError("edge endpoint is not a known user")
    half00 = 0.5 * psi[:, 2]
    source = np.maximum(deltas, 0.0)
    source = source + np.bincount(tails, weights=half00, minlength=n) + np.bincount(heads, weights=half00, minlength=n)
    sink = np.maximum(-deltas, 0.0)
    fwd = psi[:, 0] - half00
    bwd = psi[:, 1] - half00
    if np.any(fwd < 0) or np.any(bwd < 0):
        raise GraphError("link energies violate psi(0,0) <= psi(1,0) = psi(0,1)")
    return EnergyGraph(user_ids, source, sink, tails, heads, fwd, bwd)


def graph_for(inputs: EnergyInputs, params: LinkEnergyParams) -> EnergyGraph:
    return build_energy_graph(inputs.user_ids, inputs.deltas, inputs.tails, inputs.heads, inputs.psi(params))


@dataclass(frozen=True)
class CutResult:
    flow_value: float
    cut_value: float
    source_side: frozenset
    mask: np.ndarray


def _cut_capacity_mask(graph: EnergyGraph, in_source: np.ndarray) -> float:
    in_source = np.asarray(in_source, dtype=bool)
    total = graph.source_caps[~in_source].sum() + graph.sink_caps[in_source].sum()
    st, sh = in_source[graph.tails], in_source[graph.heads]
    total += graph.fwd_caps[st & ~sh].sum() + graph.bwd_caps[sh & ~st].sum()
    return float(total)


def min_cut(graph: EnergyGraph) -> CutResult:
    """Exact minimum s-t cut; the source side is the residual-reachable set from s."""
    n = len(graph.user_ids)
    s, t = n, n + 1
    users = np.arange(n, dtype=np.int64)
    tail = np.concatenate([np.full(n, s, np.int64), users, graph.tails])
    head = np.concatenate([users, np.full(n, t, np.int64), graph.heads])
    fwd = np.concatenate([graph.source_caps, graph.sink_caps, graph.fwd_caps])
    bwd = np.concatenate([np.zeros(2 * n), graph.bwd_caps])
    flow, reach = max_flow(n + 2, s, t, tail, head, fwd, bwd)
    mask = reach[:n].copy()
    side = frozenset(u for u, m in zip(graph.user_ids, mask) if m)
    return CutResult(flow, _cut_capacity_mask(graph, mask), side, mask)


def _label_array(user_ids, labels: Mapping[UserId, int]) -> np.ndarray:
    try:
        arr = np.fromiter((labels[u] for u in user_ids), dtype=np.int64, count=len(user_ids))
    except KeyError as exc:
        raise ModelError(f"no label for user {exc.args[0]!r}") from None
    if np.any((arr != 0) & (arr != 1)):
        raise ModelError("labels must be 0 or 1")
    return arr


def cut_capacity(graph: EnergyGraph, labels: Mapping[UserId, int]) -> float:
    """Capacity of the L-configuration cut (label-1 users on the source side)."""
    return _cut_capacity_mask(graph, _label_array(graph.user_ids, labels) == 1)


def _energy(inputs: EnergyInputs, lab: np.ndarray, params: LinkEnergyParams) -> float:
    d = inputs.deltas
    phi = np.where(lab == 1, np.maximum(-d, 0.0), np.maximum(d, 0.0)).sum()
    psi = inputs.psi(params)
    li, lj = lab[inputs.tails], lab[inputs.heads]
    pair = np.where(li == lj, np.where(li == 1, 0.0, psi[:, 2]), np.where(li == 1, psi[:, 0], psi[:, 1]))
    return float(phi + pair.sum())


def energy_of(snapshot, labels: Mapping[UserId, int], profile_model=None, params=None, *, inputs=None) -> float:
    """E(L): re-centered profile energies plus one link energy per observed relationship."""
    if inputs is None:
        inputs = energy_inputs(snapshot, profile_model)
    return _energy(inputs, _label_array(inputs.user_ids, labels), params)


def _flip_exponents(inputs: EnergyInputs, lab: np.ndarray, params: LinkEnergyParams) -> np.ndarray:
    """E(L with l_i=1) - E(L with l_i=0) for every user i, all other labels fixed."""
    n = len(inputs.user_ids)
    psi = inputs.psi(params)
    li, lj = lab[inputs.tails], lab[inputs.heads]
    # tail side: psi(1, lj) - psi(0, lj)
    d_tail = np.where(lj == 1, -psi[:, 1], psi[:, 0] - psi[:, 2])
    # head side: psi(li, 1) - psi(li, 0)
    d_head = np.where(li == 1, -psi[:, 0], psi[:, 1] - psi[:, 2])
    return -inputs.deltas + np.bincount(inputs.tails, d_tail, minlength=n) + np.bincount(inputs.heads, d_head, minlength=n)


def local_probabilities(inputs: EnergyInputs, labels: Mapping[UserId, int], params: LinkEnergyParams) -> np.ndarray:
    lab = _label_array(inputs.user_ids, labels)
    return expit(-_flip_exponents(inputs, lab, params))


def local_probability(snapshot, labels, user: UserId, profile_model=None, params=None, *, inputs=None) -> float:
    """P1(i): probability of label 1 for ``user`` with every other label held fixed."""
    if inputs is None:
        inputs = energy_inputs(snapshot, profile_model)
    idx = inputs.index
    if user not in idx:
        raise ModelError(f"unknown user {user!r}")
    return float(local_probabilities(inputs, labels, params)[idx[user]])


@dataclass(frozen=True)
class ClassificationResult:
    labels: Dict[UserId, int]
    energy: float
    local_probabilities: Dict[UserId, float]
    cut_value: float
    flow_value: float


def classify_inputs(inputs: EnergyInputs, params: LinkEnergyParams) -> ClassificationResult:
    graph = graph_for(inputs, params)
    cut = min_cut(graph)
    lab = cut.mask.astype(np.int64)
    labels = dict(zip(inputs.user_ids, lab.tolist()))
    probs = expit(-_flip_exponents(inputs, lab, params))
    return ClassificationResult(
        labels=labels,
        energy=_energy(inputs, lab, params),
        local_probabilities=dict(zip(inputs.user_ids, probs.tolist())),
        cut_value=cut.cut_value,
        flow_value=cut.flow_value,
    )


def classify(snapshot, profile_model: ProfileEnergyModel, params: LinkEnergyParams) -> ClassificationResult:
    """MAP labeling of every user in ``snapshot``: label 1 iff on the source side of the min cut."""
    return classify_inputs(energy_inputs(snapshot, profile_model), params)
