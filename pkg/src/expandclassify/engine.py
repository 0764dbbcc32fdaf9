"""Expand-classify loop over a pluggable social-network data source."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence

import numpy as np

from .features import CategorizerConfig, FeatureSchema, feature_matrix
from .graphcut import ClassificationResult, EnergyInputs, classify_inputs, energy_inputs
from .metrics import EvaluationError, roc_auc
from .model import FixedOddsModel, LinearModel, LinkEnergyParams, RelationshipEdge, UserId, UserProfile
from .snapshot import GeoPoint, Post, Snapshot
from .trainer import TrainConfig, TrainingError, TrainingSet, fit_logistic, fit_with_validation

log = logging.getLogger(__name__)

EARTH_RADIUS_MILES = 3958.8


class DataSource(Protocol):
    def user_search(self, query: str, limit: int = 1000) -> List[UserProfile]: ...

    def followers(self, user_id: UserId, limit: int = 5000) -> List[UserId]: ...

    def friends(self, user_id: UserId, limit: int = 5000) -> List[UserId]: ...

    def profiles(self, ids: Sequence[UserId]) -> List[UserProfile]: ...

    def recent_posts(self, user_id: UserId, limit: int = 200) -> List[Post]: ...


@dataclass(frozen=True)
class LocationSpec:
    name: str
    center: GeoPoint
    radius_miles: float

    def __post_init__(self):
        if not self.radius_miles > 0:
            raise ValueError("radius_miles must be > 0")


def haversine_miles(a: GeoPoint, b: GeoPoint) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


def label_ground_truth(posts: Sequence[Post], spec: LocationSpec) -> Optional[int]:
    """1/0 from the geo-tagged post closest to the center; None without geo posts."""
    dists = [haversine_miles(p.geo, spec.center) for p in posts if p.geo is not None]
    if not dists:
        return None
    return int(min(dists) <= spec.radius_miles)


@dataclass(frozen=True)
class ExpandBudget:
    users_per_direction: int = 30
    neighbors_per_user: int = 5000
    posts_per_user: int = 200
    profile_batch: int = 100
    max_in_flight: int = 8
    max_retries: int = 2

    def __post_init__(self):
        for name in ("users_per_direction", "neighbors_per_user", "posts_per_user", "profile_batch", "max_in_flight"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0 <= self.max_retries <= 2:
            raise ValueError("max_retries must be 0, 1 or 2")


def _fetch(fn, *args, retries: int = 2):
    for attempt in range(retries + 1):
        try:
            return fn(*args)
        except Exception as exc:  # data-source failures are never fatal
            log.warning("%s%r failed (attempt %d): %s", getattr(fn, "__name__", fn), args, attempt + 1, exc)
    return None


def _fetch_all(fn, arg_list, budget: ExpandBudget, pool: ThreadPoolExecutor) -> list:
    return list(pool.map(lambda args: _fetch(fn, *args, retries=budget.max_retries), arg_list))


def _add_users(snapshot: Snapshot, ids: Sequence[UserId], source: DataSource, budget: ExpandBudget,
               spec: LocationSpec, pool: ThreadPoolExecutor) -> List[UserId]:
    ids = [u for u in dict.fromkeys(ids) if u not in snapshot.users]
    batches = [(ids[i:i + budget.profile_batch],) for i in range(0, len(ids), budget.profile_batch)]
    found: Dict[UserId, UserProfile] = {}
    for batch in _fetch_all(source.profiles, batches, budget, pool):
        for p in batch or ():
            found.setdefault(p.id, p)
    added = [u for u in ids if u in found]
    posts = _fetch_all(source.recent_posts, [(u, budget.posts_per_user) for u in added], budget, pool)
    for u, plist in zip(added, posts):
        snapshot.add_user(found[u])
        plist = list(plist or ())
        snapshot.posts[u] = plist
        snapshot.ground_truth[u] = label_ground_truth(plist, spec)
    return added


def _edge(snapshot: Snapshot, follower: UserId, friend: UserId) -> RelationshipEdge:
    return RelationshipEdge(
        follower, friend, snapshot.users[follower].friends_count, snapshot.users[friend].followers_count
    )


def expansion_pool(snapshot: Snapshot) -> List[UserId]:
    pool = [u for u in snapshot.users if snapshot.labels.get(u) == 1]
    if not pool:
        pool = [u for u in snapshot.seeds if u in snapshot.users]
    return pool


def expand_step(snapshot: Snapshot, source: DataSource, budget: ExpandBudget, rng: np.random.Generator,
                spec: LocationSpec) -> Snapshot:
    """Query followers of one random batch of label-1 users and friends of another.

    New users are added with their profiles, recent posts and ground truth;
    every discovered relationship between known users becomes an edge.
    """
    pool = expansion_pool(snapshot)
    k = min(budget.users_per_direction, len(pool))
    if k == 0:
        return snapshot
    by_followers = [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]
    by_friends = [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]
    lim = budget.neighbors_per_user
    with ThreadPoolExecutor(max_workers=budget.max_in_flight) as ex:
        fol = _fetch_all(source.followers, [(u, lim) for u in by_followers], budget, ex)
        fri = _fetch_all(source.friends, [(u, lim) for u in by_friends], budget, ex)
        fol = [list(r or ())[:lim] for r in fol]
        fri = [list(r or ())[:lim] for r in fri]
        discovered = [v for lst in fol + fri for v in lst]
        added = _add_users(snapshot, discovered, source, budget, spec, ex)
    for u, lst in zip(by_followers, fol):
        for v in lst:
            if v in snapshot.users and v != u:
                snapshot.add_edge(_edge(snapshot, v, u))
    for u, lst in zip(by_friends, fri):
        for v in lst:
            if v in snapshot.users and v != u:
                snapshot.add_edge(_edge(snapshot, u, v))
    log.info("expand: %d queried, %d new users, %d users, %d edges", 2 * k, len(added),
             len(snapshot.users), len(snapshot.edges))
    return snapshot


# -- profile model setup --------------------------------------------------------


@dataclass
class ProfileSetup:
    """How to obtain a profile energy model for a snapshot.

    ``mode`` is ``"fixed_odds"`` or ``"logistic"``. Logistic mode refits on all
    users with known ground truth and falls back to fixed odds when the
    ground truth cannot support a fit.
    """

    mode: str = "logistic"
    schema: Optional[FeatureSchema] = None
    categorizer: Optional[CategorizerConfig] = None
    C_grid: Sequence[float] = (0.01, 0.1, 1.0, 10.0)
    norm: str = "l1"
    train: TrainConfig = field(default_factory=TrainConfig)
    _rows: Dict[UserId, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in ("fixed_odds", "logistic"):
            raise ValueError(f"unknown profile model mode {self.mode!r}")
        if self.mode == "logistic" and self.schema is None:
            raise ValueError("logistic mode needs a feature schema")
        if self.mode == "fixed_odds" and self.categorizer is None:
            raise ValueError("fixed_odds mode needs a categorizer config")

    def features(self, snapshot: Snapshot) -> np.ndarray:
        new = [p for u, p in snapshot.users.items() if u not in self._rows]
        if new:
            for p, row in zip(new, feature_matrix(new, self.schema)):
                self._rows[p.id] = row
        if not snapshot.users:
            return np.zeros((0, len(self.schema)), np.uint8)
        return np.stack([self._rows[u] for u in snapshot.users])

    def training_set(self, snapshot: Snapshot, X: Optional[np.ndarray] = None) -> TrainingSet:
        if X is None:
            X = self.features(snapshot)
        ids = list(snapshot.users)
        known = [i for i, u in enumerate(ids) if snapshot.ground_truth.get(u) in (0, 1)]
        y = np.array([snapshot.ground_truth[ids[i]] for i in known], dtype=np.int64)
        return TrainingSet(X[known], y, self.schema)

    def fixed_odds(self) -> FixedOddsModel:
        cat = self.categorizer
        if cat is None:
            # no categorizer configured: treat every W1 term as a T2 string
            terms = tuple(dict.fromkeys(f.term for f in self.schema.features if f.kind == "term"))
            cat = CategorizerConfig(t2=terms)
        return FixedOddsModel(cat, cat.odds)

    def build(self, snapshot: Snapshot, C: Optional[float] = None):
        """Return ``(model, info)`` where ``info`` describes what was fitted."""
        if self.mode == "fixed_odds":
            return self.fixed_odds(), {"profile_model": "fixed_odds"}
        X = self.features(snapshot)
        data = self.training_set(snapshot, X)
        try:
            if C is None:
                beta, chosen, vauc = fit_with_validation(data, self.C_grid, self.norm, self.train)
            else:
                cfg = TrainConfig(C=C, norm=self.norm, max_iterations=self.train.max_iterations,
                                  tol=self.train.tol, seed=self.train.seed)
                beta, chosen, vauc = fit_logistic(data, cfg), C, None
        except TrainingError as exc:
            log.warning("logistic fit impossible (%s); using fixed odds for this iteration", exc)
            return self.fixed_odds(), {"profile_model": "fixed_odds_fallback", "reason": str(exc)}
        model = LinearModel(self.schema, beta, chosen)
        return model, {"profile_model": "logistic", "C": chosen, "validation_auc": vauc}

    def inputs(self, snapshot: Snapshot, model) -> EnergyInputs:
        if isinstance(model, LinearModel) and model.schema is self.schema:
            return energy_inputs(snapshot, deltas=self.features(snapshot) @ model.beta)
        return energy_inputs(snapshot, model)


# -- run loop -----------------------------------------------------------------


@dataclass
class RunResult:
    snapshot: Snapshot
    result: ClassificationResult
    model: object
    history: List[dict]


def evaluate_auc(snapshot: Snapshot, probabilities: Dict[UserId, float]) -> Optional[float]:
    try:
        return roc_auc(probabilities, snapshot.ground_truth).auc
    except EvaluationError:
        return None


def seed_snapshot(source: DataSource, spec: LocationSpec, seed_queries: Sequence[str] = (),
                  seed_ids: Sequence[UserId] = (), budget: ExpandBudget = ExpandBudget()) -> Snapshot:
    snap = Snapshot()
    ids: List[UserId] = list(seed_ids)
    for q in seed_queries:
        found = _fetch(source.user_search, q, 1000, retries=budget.max_retries) or []
        ids.extend(p.id for p in found)
    ids = list(dict.fromkeys(ids))
    with ThreadPoolExecutor(max_workers=budget.max_in_flight) as ex:
        added = _add_users(snap, ids, source, budget, spec, ex)
    if not added:
        raise RuntimeError("seed set is empty")
    snap.seeds = added
    return snap


def classify_snapshot(snapshot: Snapshot, setup: ProfileSetup, params: LinkEnergyParams):
    model, info = setup.build(snapshot)
    result = classify_inputs(setup.inputs(snapshot, model), params)
    return model, info, result


def run(source: DataSource, spec: LocationSpec, params: LinkEnergyParams, setup: ProfileSetup, *,
        seed_queries: Sequence[str] = (), seed_ids: Sequence[UserId] = (), max_iterations: int = 5,
        max_seconds: Optional[float] = None, budget: ExpandBudget = ExpandBudget(), seed: int = 0) -> RunResult:
    """Seed, classify, then alternate expand and classify.

    Stops after ``max_iterations`` expand steps or, checked between
    iterations, once ``max_seconds`` of wall-clock time have elapsed.
    """
    started = time.monotonic()
    rng = np.random.default_rng(seed)
    snap = seed_snapshot(source, spec, seed_queries, seed_ids, budget)
    history = []

    def classify_and_record():
        model, info, result = classify_snapshot(snap, setup, params)
        snap.labels = dict(result.labels)
        row = {
            "iteration": snap.iteration,
            "users": len(snap.users),
            "edges": len(snap.edges),
            "classified_in_location": int(sum(result.labels.values())),
            "geo_users": sum(1 for v in snap.ground_truth.values() if v is not None),
            "geo_users_in_location": sum(1 for v in snap.ground_truth.values() if v == 1),
            "auc": evaluate_auc(snap, result.local_probabilities),
            "energy": result.energy,
            **info,
        }
        history.append(row)
        log.info("iteration %d: %s", snap.iteration, row)
        return model, result

    model, result = classify_and_record()
    while snap.iteration < max_iterations:
        if max_seconds is not None and time.monotonic() - started >= max_seconds:
            log.info("wall-clock budget reached after %d iterations", snap.iteration)
            break
        expand_step(snap, source, budget, rng, spec)
        snap.iteration += 1
        model, result = classify_and_record()
    snap.rng_state = rng.bit_generator.state
    return RunResult(snap, result, model, history)
