"""Exact s-t max-flow / min-cut on float capacities (Dinic, compiled with numba).

Arcs are given as pairs: pair ``k`` connects ``tail[k] -> head[k]`` with
capacity ``cap_fwd[k]`` and the opposite direction with ``cap_bwd[k]``, which
lets an undirected-style pair of arcs share one residual slot each way.
Saturation is exact: the bottleneck arc of an augmenting path is set to
exactly zero residual, so no epsilon is needed for termination.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _dinic(n_nodes, s, t, start, order, head, res):
    flow = 0.0
    level = np.empty(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int64)
    it = np.empty(n_nodes, np.int64)
    path = np.empty(n_nodes, np.int64)
    while True:
        level[:] = -1
        level[s] = 0
        qh = 0
        qt = 1
        queue[0] = s
        while qh < qt:
            v = queue[qh]
            qh += 1
            for k in range(start[v], start[v + 1]):
                e = order[k]
                w = head[e]
                if level[w] < 0 and res[e] > 0.0:
                    level[w] = level[v] + 1
                    queue[qt] = w
                    qt += 1
        if level[t] < 0:
            break
        for v in range(n_nodes):
            it[v] = start[v]
        depth = 0
        v = s
        while True:
            if v == t:
                b = np.inf
                for d in range(depth):
                    r = res[path[d]]
                    if r < b:
                        b = r
                for d in range(depth):
                    e = path[d]
                    res[e] -= b
                    res[e ^ 1] += b
                flow += b
                back = depth
                for d in range(depth):
                    if res[path[d]] <= 0.0:
                        back = d
                        break
                depth = back
                if depth == 0:
                    v = s
                else:
                    v = head[path[depth - 1]]
                continue
            advanced = False
            while it[v] < start[v + 1]:
                e = order[it[v]]
                w = head[e]
                if res[e] > 0.0 and level[w] == level[v] + 1:
                    path[depth] = e
                    depth += 1
                    v = w
                    advanced = True
                    break
                it[v] += 1
            if not advanced:
                if v == s:
                    break
                level[v] = -1
                depth -= 1
                e = path[depth]
                v = head[e ^ 1]
                it[v] += 1
    return flow


@njit(cache=True)
def _reachable(n_nodes, s, start, order, head, res):
    seen = np.zeros(n_nodes, np.bool_)
    stack = np.empty(n_nodes, np.int64)
    seen[s] = True
    stack[0] = s
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        for k in range(start[v], start[v + 1]):
            e = order[k]
            w = head[e]
            if not seen[w] and res[e] > 0.0:
                seen[w] = True
                stack[top] = w
                top += 1
    return seen


def max_flow(n_nodes: int, s: int, t: int, tail, head, cap_fwd, cap_bwd):
    """Return ``(flow_value, source_side_mask)``.

    ``source_side_mask[v]`` is True when ``v`` is reachable from ``s`` in the
    final residual graph, i.e. the minimal source side of a minimum cut.
    """
    tail = np.asarray(tail, dtype=np.int64)
    head = np.asarray(head, dtype=np.int64)
    m = len(tail)
    arc_head = np.empty(2 * m, np.int64)
    arc_head[0::2] = head
    arc_head[1::2] = tail
    arc_tail = np.empty(2 * m, np.int64)
    arc_tail[0::2] = tail
    arc_tail[1::2] = head
    res = np.empty(2 * m, np.float64)
    res[0::2] = cap_fwd
    res[1::2] = cap_bwd
    if np.any(res < 0) or not np.all(np.isfinite(res)):
        raise ValueError("capacities must be finite and nonnegative")
    order = np.argsort(arc_tail, kind="stable")
    start = np.zeros(n_nodes + 1, np.int64)
    np.cumsum(np.bincount(arc_tail, minlength=n_nodes), out=start[1:])
    flow = _dinic(n_nodes, s, t, start, order, arc_head, res)
    return float(flow), _reachable(n_nodes, s, start, order, arc_head, res)
