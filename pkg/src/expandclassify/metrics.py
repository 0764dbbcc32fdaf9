"""ROC curves and AUC."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class RocReport:
    """ROC points ordered by decreasing threshold, from (0, 0) to (1, 1).

    A user is predicted positive at threshold ``h`` when its score is >= h.
    The first point has threshold +inf.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    positives: int
    negatives: int

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))


def _roc(scores, truth):
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=np.int64)
    P = int((truth == 1).sum())
    N = int((truth == 0).sum())
    if P == 0 or N == 0:
        raise EvaluationError(f"need both classes, got {P} positives and {N} negatives")
    if np.any(np.isnan(scores)):
        raise EvaluationError("scores contain NaN")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = truth[order]
    tp = np.cumsum(t == 1)
    fp = np.cumsum(t == 0)
    # one step per distinct score: keep the last index of each run of ties
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.r_[0, tp[last]].astype(np.int64)
    fp = np.r_[0, fp[last]].astype(np.int64)
    thresholds = np.r_[np.inf, s[last]]
    # integer trapezoid sum, one division: identical to the pairwise statistic
    twice_area = int(((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])).sum())
    auc = twice_area / (2 * P * N)
    return thresholds, fp / N, tp / P, auc, P, N


def roc_auc_arrays(scores, truth) -> float:
    return _roc(scores, truth)[3]


def roc_auc(scores: Mapping, truth: Mapping[object, Optional[int]]) -> RocReport:
    """ROC over users present in both maps whose ground truth is 0 or 1."""
    ids = [u for u, v in truth.items() if v in (0, 1) and u in scores]
    th, fpr, tpr, auc, P, N = _roc([scores[u] for u in ids], [truth[u] for u in ids])
    return RocReport(th, fpr, tpr, auc, P, N)

