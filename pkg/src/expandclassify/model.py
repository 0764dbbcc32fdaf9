"""Energy model: link energy psi, profile energy differences, and their parameters.

Labels are binary: 1 means "in the location of interest", 0 otherwise.
Only the profile energy difference ``delta = phi(x, 0) - phi(x, 1)`` is ever
needed; the absolute profile energies are re-centered by the graph builder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

UserId = Union[int, str]
LabelVector = Mapping[UserId, int]

CATEGORIES = ("A", "B", "C", "D", "E")


class ModelError(ValueError):
    """Invalid model parameters or inputs that do not match the model."""


@dataclass(frozen=True)
class UserProfile:
    id: UserId
    screen_name: str = ""
    name: str = ""
    description: str = ""
    location_text: str = ""
    language_code: str = ""
    utc_offset_seconds: Optional[int] = None
    protected: bool = False
    verified: bool = False
    friends_count: Optional[int] = 0
    followers_count: Optional[int] = 0

    def __post_init__(self):
        for name in ("friends_count", "followers_count"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ModelError(f"{name} must be >= 0, got {v}")


@dataclass(frozen=True)
class RelationshipEdge:
    """``follower`` follows ``friend``.

    ``z1`` is the follower's friends count (out-degree) and ``z2`` the
    friend's followers count (in-degree). ``None`` means the data source
    returned no count.
    """

    follower: UserId
    friend: UserId
    z1: Optional[int]
    z2: Optional[int]

    def __post_init__(self):
        if self.follower == self.friend:
            raise ModelError(f"self-loop on user {self.follower!r}")
        if (self.z1 is not None and self.z1 < 0) or (self.z2 is not None and self.z2 < 0):
            raise ModelError("degree counts must be >= 0")


@dataclass(frozen=True)
class LinkEnergyParams:
    gamma: float = math.log(5)
    alpha1: float = 500.0
    alpha2: float = 5000.0
    lam: float = 0.98

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ModelError(f"gamma must be >= 0, got {self.gamma}")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ModelError("alpha1 and alpha2 must be > 0")
        if not 0 <= self.lam <= 1:
            raise ModelError(f"lambda must lie in [0, 1], got {self.lam}")


def _psi_mixed(z1: Optional[float], z2: Optional[float], params: LinkEnergyParams) -> float:
    if z1 is None or z2 is None:
        return 0.0
    # written as z/alpha so that z == alpha gives an exact zero exponent
    x = 2.0 - 2.0 * (z1 / params.alpha1) - 2.0 * (z2 / params.alpha2)
    return params.gamma * float(expit(x))


def link_energy(edge: Optional[RelationshipEdge], li: int, lj: int, params: LinkEnergyParams) -> float:
    """psi(z, li, lj) for one observed relationship (0 when ``edge`` is None)."""
    if edge is None or (li == 1 and lj == 1):
        return 0.0
    mixed = _psi_mixed(edge.z1, edge.z2, params)
    if li != lj:
        return mixed
    return params.lam * mixed


def link_energy_table(z1: np.ndarray, z2: np.ndarray, params: LinkEnergyParams) -> np.ndarray:
    """Vectorized psi values, shape (m, 3): columns psi(1,0), psi(0,1), psi(0,0).

    NaN degrees are treated as missing and give zero energy.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    x = 2.0 - 2.0 * (z1 / params.alpha1) - 2.0 * (z2 / params.alpha2)
    mixed = params.gamma * expit(x)
    mixed = np.where(np.isnan(mixed), 0.0, mixed)
    return np.column_stack([mixed, mixed, params.lam * mixed])


# -- profile energy ---------------------------------------------------------


@dataclass(frozen=True)
class FixedOddsModel:
    """Category -> odds table profile model; ``categorizer`` is a CategorizerConfig."""

    categorizer: object
    odds: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        missing = [c for c in CATEGORIES if c not in self.odds]
        if missing:
            raise ModelError(f"odds table is missing categories {missing}")
        for c, (num, den) in self.odds.items():
            if not (num > 0 and den > 0):
                raise ModelError(f"odds for {c} must be positive")

    def delta_for_category(self, category: str) -> float:
        from .features import fixed_odds_delta

        return fixed_odds_delta(category, self.odds)

    def deltas(self, profiles: Sequence[UserProfile]) -> np.ndarray:
        from .features import categorize

        table = {c: self.delta_for_category(c) for c in CATEGORIES}
        return np.array([table[categorize(p, self.categorizer)] for p in profiles], dtype=float)


@dataclass(frozen=True)
class LinearModel:
    """delta = beta . x over the features of ``schema``."""

    schema: object
    beta: np.ndarray
    C: Optional[float] = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or len(beta) != len(self.schema):
            raise ModelError(f"beta has length {beta.size}, schema has {len(self.schema)} features")
        object.__setattr__(self, "beta", beta)

    def deltas(self, profiles: Sequence[UserProfile]) -> np.ndarray:
        from .features import feature_matrix

        if not profiles:
            return np.zeros(0)
        return feature_matrix(profiles, self.schema) @ self.beta


ProfileEnergyModel = Union[FixedOddsModel, LinearModel]


def profile_energy_delta(x, model: ProfileEnergyModel) -> float:
    """phi(x, 0) - phi(x, 1).

    ``x`` is a feature vector for a :class:`LinearModel` and either a
    category letter or a :class:`UserProfile` for a :class:`FixedOddsModel`.
    """
    if isinstance(model, LinearModel):
        x = np.asarray(x, dtype=float)
        if x.shape != model.beta.shape:
            raise ModelError(f"feature vector has shape {x.shape}, expected {model.beta.shape}")
        return float(x @ model.beta)
    if isinstance(x, UserProfile):
        return float(model.deltas([x])[0])
    return model.delta_for_category(x)
