"""Parameter sensitivity sweeps and term-frequency reports."""
from __future__ import annotations

import dataclasses
import logging
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date
from typing import Iterable, List, Optional, Sequence, Tuple

from .engine import ProfileSetup
from .graphcut import classify_inputs
from .metrics import roc_auc
from .model import LinkEnergyParams
from .snapshot import Post, Snapshot

log = logging.getLogger(__name__)

AXES = ("gamma", "lambda", "C")


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    auc: Optional[float]
    status: str = "ok"


@dataclass(frozen=True)
class SweepReport:
    axis: str
    rows: Tuple[SweepRow, ...]
    baseline_auc: Optional[float]

    def as_csv_rows(self) -> List[list]:
        rows = [[r.axis, repr(float(r.value)), "" if r.auc is None else repr(r.auc), r.status] for r in self.rows]
        rows.append(["baseline_gamma", repr(0.0), "" if self.baseline_auc is None else repr(self.baseline_auc), "ok"])
        return rows


def _auc(snapshot: Snapshot, inputs, params: LinkEnergyParams) -> float:
    result = classify_inputs(inputs, params)
    return roc_auc(result.local_probabilities, snapshot.ground_truth).auc


def sweep(snapshot: Snapshot, setup: ProfileSetup, base: LinkEnergyParams, axis: str, values: Sequence[float]) -> SweepReport:
    """Re-classify the frozen snapshot once per value of ``axis``, others held at ``base``.

    Failed cells are reported with ``status`` set to the error text.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    model, _ = setup.build(snapshot)
    inputs = setup.inputs(snapshot, model)
    rows = []
    for v in values:
        try:
            if axis == "gamma":
                auc = _auc(snapshot, inputs, dataclasses.replace(base, gamma=float(v)))
            elif axis == "lambda":
                auc = _auc(snapshot, inputs, dataclasses.replace(base, lam=float(v)))
            else:
                m, _ = setup.build(snapshot, C=float(v))
                auc = _auc(snapshot, setup.inputs(snapshot, m), base)
            rows.append(SweepRow(axis, float(v), auc))
        except ValueError as exc:
            log.warning("sweep cell %s=%s failed: %s", axis, v, exc)
            rows.append(SweepRow(axis, float(v), None, f"failed: {exc}"))
    try:
        baseline = _auc(snapshot, inputs, dataclasses.replace(base, gamma=0.0))
    except ValueError as exc:
        log.warning("baseline failed: %s", exc)
        baseline = None
    return SweepReport(axis, tuple(rows), baseline)


_TOKEN = re.compile(r"\w+")


def _post_date(post: Post) -> Optional[date]:
    try:
        return date.fromisoformat(post.timestamp[:10])
    except ValueError:
        return None


def term_frequencies(posts: Iterable[Post], start: Optional[date] = None, end: Optional[date] = None,
                     stopwords: Iterable[str] = (), top_k: Optional[int] = None) -> List[Tuple[str, int]]:
    """Case-folded token counts over posts dated within [start, end], most frequent first."""
    stop = {w.casefold() for w in stopwords}
    counts: Counter = Counter()
    for post in posts:
        if start is not None or end is not None:
            d = _post_date(post)
            if d is None or (start is not None and d < start) or (end is not None and d > end):
                continue
        counts.update(t for t in _TOKEN.findall(post.text.casefold()) if t not in stop)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if top_k is None else ranked[:top_k]
