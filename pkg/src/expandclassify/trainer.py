"""Regularized logistic regression for the linear profile energy model.

Maximizes ``C * loglik(beta) - ||beta||`` where ``||beta||`` is ``sum|beta|``
(L1) or ``beta.beta / 2`` (L2). There is no implicit intercept; add a bias
feature to the schema if one is wanted.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .features import FeatureSchema
from .metrics import roc_auc_arrays
from .model import LinearModel, ModelError

log = logging.getLogger(__name__)


class TrainingError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainingSet:
    X: np.ndarray
    y: np.ndarray
    schema: Optional[FeatureSchema] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise TrainingError(f"X has shape {X.shape} but there are {y.shape[0]} labels")
        if self.schema is not None and X.shape[1] != len(self.schema):
            raise TrainingError("X columns do not match the schema")
        if not np.all(np.isfinite(X)):
            raise TrainingError("features must be finite")
        if np.any((y != 0) & (y != 1)):
            raise TrainingError("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    norm: str = "l1"
    max_iterations: int = 1000
    tol: float = 1e-8
    validation_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise TrainingError(f"C must be > 0, got {self.C}")
        if not self.tol > 0:
            raise TrainingError("tol must be > 0")
        if self.norm not in ("l1", "l2"):
            raise TrainingError(f"norm must be 'l1' or 'l2', got {self.norm!r}")
        if not 0 < self.validation_fraction < 1:
            raise TrainingError("validation_fraction must lie in (0, 1)")


def log_likelihood(beta, X, y) -> float:
    m = X @ beta
    s = np.where(y == 1, m, -m)
    return float(-np.logaddexp(0.0, -s).sum())


def objective(beta, X, y, C, norm) -> float:
    """The maximized quantity ``C * loglik - penalty``."""
    beta = np.asarray(beta, dtype=float)
    pen = np.abs(beta).sum() if norm == "l1" else 0.5 * beta @ beta
    return C * log_likelihood(beta, X, y) - pen


def objective_gradient(beta, X, y, C) -> np.ndarray:
    """Gradient of the L2 objective."""
    beta = np.asarray(beta, dtype=float)
    return C * (X.T @ (y - expit(X @ beta))) - beta


def fit_logistic(data: TrainingSet, cfg: TrainConfig) -> np.ndarray:
    X, y = data.X, data.y
    if y.size == 0 or y.min() == y.max():
        raise TrainingError("training data must contain both classes")
    d = X.shape[1]
    C = cfg.C
    opts = {"maxiter": cfg.max_iterations, "gtol": cfg.tol * max(1.0, C * len(y)), "ftol": 1e-15}

    if cfg.norm == "l2":

        def f(b):
            m = X @ b
            s = np.where(y == 1, m, -m)
            val = C * np.logaddexp(0.0, -s).sum() + 0.5 * b @ b
            grad = -C * (X.T @ (y - expit(m))) + b
            return val, grad

        res = minimize(f, np.zeros(d), jac=True, method="L-BFGS-B", options=opts)
        beta = res.x
    else:
        # beta = p - q with p, q >= 0 turns the L1 penalty into a smooth bound-constrained problem
        def f(w):
            b = w[:d] - w[d:]
            m = X @ b
            s = np.where(y == 1, m, -m)
            val = C * np.logaddexp(0.0, -s).sum() + w.sum()
            g = -C * (X.T @ (y - expit(m)))
            return val, np.concatenate([g + 1.0, -g + 1.0])

        res = minimize(f, np.zeros(2 * d), jac=True, method="L-BFGS-B", bounds=[(0, None)] * (2 * d), options=opts)
        beta = res.x[:d] - res.x[d:]
    if not res.success:
        warnings.warn(f"logistic fit did not converge: {res.message}", ConvergenceWarning, stacklevel=2)
    return beta


def predict_proba(beta, x) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != beta.shape[0]:
        raise ModelError(f"feature dimension {x.shape[-1]} does not match beta dimension {beta.shape[0]}")
    p = expit(x @ beta)
    # keep strictly inside (0, 1)
    tiny = np.finfo(float).tiny
    p = np.clip(p, tiny, 1.0 - np.finfo(float).epsneg)
    return p if p.ndim else float(p)


def _stratified_split(y, fraction, rng):
    val = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        k = int(round(fraction * len(idx)))
        k = min(max(k, 1), len(idx) - 1)
        val.append(idx[:k])
    val = np.sort(np.concatenate(val))
    train = np.setdiff1d(np.arange(len(y)), val)
    return train, val


def fit_with_validation(data: TrainingSet, candidate_Cs: Sequence[float], norm: str = "l1", cfg: Optional[TrainConfig] = None):
    """Choose C by validation AUC, then refit on all data.

    Returns ``(beta, chosen_C, validation_auc)``. Ties go to the smallest C.
    """
    cfg = cfg or TrainConfig(norm=norm)
    if not candidate_Cs:
        raise TrainingError("no candidate C values")
    y = data.y
    if min((y == 0).sum(), (y == 1).sum()) < 2:
        raise TrainingError("each class needs at least two examples to split for validation")
    rng = np.random.default_rng(cfg.seed)
    train, val = _stratified_split(y, cfg.validation_fraction, rng)
    sub = TrainingSet(data.X[train], y[train], data.schema)
    best = None
    for C in sorted(set(float(c) for c in candidate_Cs)):
        c_cfg = TrainConfig(C=C, norm=norm, max_iterations=cfg.max_iterations, tol=cfg.tol,
                            validation_fraction=cfg.validation_fraction, seed=cfg.seed)
        beta = fit_logistic(sub, c_cfg)
        auc = roc_auc_arrays(data.X[val] @ beta, y[val])
        log.debug("C=%g validation AUC=%.4f", C, auc)
        if best is None or auc > best[1]:
            best = (C, auc)
    C, auc = best
    final = TrainConfig(C=C, norm=norm, max_iterations=cfg.max_iterations, tol=cfg.tol,
                        validation_fraction=cfg.validation_fraction, seed=cfg.seed)
    return fit_logistic(data, final), C, auc


# -- model file ---------------------------------------------------------------


def save_model(model: LinearModel, path) -> None:
    doc = {
        "schema": model.schema.to_dict(),
        "beta": [float(b) for b in model.beta],
        "C": model.C,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_model(path) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return LinearModel(FeatureSchema.from_dict(doc["schema"]), np.array(doc["beta"], dtype=float), doc.get("C"))
