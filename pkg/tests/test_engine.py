import logging
import math
import threading

import numpy as np
import pytest

from expandclassify.engine import (
    ExpandBudget,
    LocationSpec,
    ProfileSetup,
    expand_step,
    haversine_miles,
    label_ground_truth,
    run,
    seed_snapshot,
)
from expandclassify.features import CategorizerConfig, location_schema
from expandclassify.model import FixedOddsModel, LinkEnergyParams
from expandclassify.snapshot import GeoPoint, Post, Snapshot
from expandclassify.synthnet import DEFAULT_TERMS, SynthConfig, as_data_source, generate

CORINTO = LocationSpec("Corinto", GeoPoint(3.174159, -76.2588), 7.0)


def test_haversine_known_distances():
    assert haversine_miles(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0
    # a quarter of a great circle
    assert haversine_miles(GeoPoint(0, 0), GeoPoint(0, 90)) == pytest.approx(math.pi / 2 * 3958.8, rel=1e-12)
    assert haversine_miles(GeoPoint(90, 0), GeoPoint(-90, 0)) == pytest.approx(math.pi * 3958.8, rel=1e-12)
    # New York to London is about 3460 miles
    assert haversine_miles(GeoPoint(40.7128, -74.0060), GeoPoint(51.5074, -0.1278)) == pytest.approx(3460, rel=0.01)
    a, b = GeoPoint(3.1, -76.2), GeoPoint(-22.48, -42.2)
    assert haversine_miles(a, b) == haversine_miles(b, a)


def test_ground_truth_closest_post():
    near = GeoPoint(3.20, -76.26)
    far = GeoPoint(10.48, -66.90)
    assert label_ground_truth([], CORINTO) is None
    assert label_ground_truth([Post(1, "x")], CORINTO) is None
    assert label_ground_truth([Post(1, "a", far)], CORINTO) == 0
    assert label_ground_truth([Post(1, "a", far), Post(1, "b", near)], CORINTO) == 1


def test_ground_truth_radius_boundary_is_inside():
    c = GeoPoint(0.0, 0.0)
    p = GeoPoint(0.0, 0.1)
    r = haversine_miles(c, p)
    assert label_ground_truth([Post(1, "x", p)], LocationSpec("x", c, r)) == 1
    assert label_ground_truth([Post(1, "x", p)], LocationSpec("x", c, r * (1 - 1e-12))) == 0


def test_location_validation():
    with pytest.raises(ValueError):
        LocationSpec("x", GeoPoint(0, 0), 0)
    with pytest.raises(ValueError):
        GeoPoint(91, 0)
    with pytest.raises(ValueError):
        GeoPoint(0, -181)


class CountingSource:
    """Wraps a source; counts neighbor calls, tracks concurrency and fails on request."""

    def __init__(self, inner, fail_users=(), fail_times=1):
        self.inner = inner
        self.fail = {u: fail_times for u in fail_users}
        self.calls = {"followers": [], "friends": [], "profiles": 0, "recent_posts": 0}
        self.lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def _enter(self):
        with self.lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)

    def _leave(self):
        with self.lock:
            self.in_flight -= 1

    def _maybe_fail(self, u):
        with self.lock:
            if self.fail.get(u, 0) > 0:
                self.fail[u] -= 1
                raise ConnectionError(f"boom {u}")

    def user_search(self, q, limit=1000):
        return self.inner.user_search(q, limit)

    def followers(self, u, limit=5000):
        self._enter()
        try:
            self.calls["followers"].append((u, limit))
            self._maybe_fail(u)
            return self.inner.followers(u, limit)
        finally:
            self._leave()

    def friends(self, u, limit=5000):
        self._enter()
        try:
            self.calls["friends"].append((u, limit))
            self._maybe_fail(u)
            return self.inner.friends(u, limit)
        finally:
            self._leave()

    def profiles(self, ids):
        self.calls["profiles"] += 1
        return self.inner.profiles(ids)

    def recent_posts(self, u, limit=200):
        self.calls["recent_posts"] += 1
        return self.inner.recent_posts(u, limit)


@pytest.fixture(scope="module")
def world():
    return generate(SynthConfig(seed=5))


def fixed_setup():
    return ProfileSetup(mode="fixed_odds", categorizer=CategorizerConfig(t2=DEFAULT_TERMS))


def test_seed_snapshot(world):
    src = as_data_source(world)
    snap = seed_snapshot(src, world.config.location, ["Sintetica"])
    assert snap.seeds and all("sintetic" in (p.location_text.casefold()) for p in snap.users.values())
    assert set(snap.ground_truth) == set(snap.users)
    with pytest.raises(RuntimeError):
        seed_snapshot(src, world.config.location, ["no such place anywhere"])


def test_expand_step_budget_and_invariants(world):
    src = CountingSource(as_data_source(world))
    spec = world.config.location
    budget = ExpandBudget(users_per_direction=4, neighbors_per_user=7, max_in_flight=3)
    snap = seed_snapshot(src, spec, ["Sintetica"], budget=budget)
    rng = np.random.default_rng(0)
    before = dict(snap.ground_truth)
    users_before = list(snap.users)
    expand_step(snap, src, budget, rng, spec)
    assert len(src.calls["followers"]) <= 4 and len(src.calls["friends"]) <= 4
    assert all(limit == 7 for _, limit in src.calls["followers"] + src.calls["friends"])
    assert list(snap.users)[: len(users_before)] == users_before
    assert all(snap.ground_truth[u] == v for u, v in before.items())
    snap.check()
    assert src.max_in_flight <= 3
    # each discovered edge is a real relationship in the world
    real = {(e.follower, e.friend) for e in world.snapshot.edges}
    assert all((e.follower, e.friend) in real for e in snap.edges)


def test_expand_step_retries_then_skips(world, caplog):
    spec = world.config.location
    base = as_data_source(world)
    snap = seed_snapshot(base, spec, ["Sintetica"])
    pool = list(snap.seeds)
    # one failure is retried; three failures exhaust the two retries
    src = CountingSource(base, fail_users=pool, fail_times=3)
    with caplog.at_level(logging.WARNING):
        expand_step(snap, src, ExpandBudget(users_per_direction=len(pool)), np.random.default_rng(1), spec)
    assert "failed" in caplog.text
    per_user = {}
    for u, _ in src.calls["followers"]:
        per_user[u] = per_user.get(u, 0) + 1
    assert max(per_user.values()) <= 3
    snap.check()


def test_expansion_uses_label_one_users(world):
    spec = world.config.location
    src = CountingSource(as_data_source(world))
    snap = seed_snapshot(src, spec, ["Sintetica"])
    target = list(snap.users)[-1]
    snap.labels = {u: int(u == target) for u in snap.users}
    expand_step(snap, src, ExpandBudget(users_per_direction=5), np.random.default_rng(2), spec)
    assert {u for u, _ in src.calls["followers"] + src.calls["friends"]} == {target}


def test_run_grows_monotonically_and_is_deterministic(world):
    src = as_data_source(world)
    kw = dict(seed_queries=["Sintetica"], max_iterations=3, budget=ExpandBudget(users_per_direction=10), seed=4)
    a = run(src, world.config.location, LinkEnergyParams(), fixed_setup(), **kw)
    b = run(src, world.config.location, LinkEnergyParams(), fixed_setup(), **kw)
    sizes = [h["users"] for h in a.history]
    assert len(a.history) == 4
    assert all(x <= y for x, y in zip(sizes, sizes[1:])) and sizes[-1] > sizes[0]
    assert a.result.labels == b.result.labels
    assert a.result.local_probabilities == b.result.local_probabilities
    assert a.history == b.history
    assert len(set(a.snapshot.users)) == len(a.snapshot.users)
    a.snapshot.check()
    assert a.snapshot.rng_state is not None


def test_run_stops_on_wall_clock(world):
    res = run(as_data_source(world), world.config.location, LinkEnergyParams(), fixed_setup(),
              seed_queries=["Sintetica"], max_iterations=50, max_seconds=0.0)
    assert res.snapshot.iteration == 0


def test_logistic_falls_back_to_fixed_odds(caplog):
    snap = Snapshot()
    from expandclassify.model import UserProfile

    for u in range(6):
        snap.add_user(UserProfile(id=u, location_text="Sintetica" if u < 3 else ""))
        snap.ground_truth[u] = 1 if u == 0 else None
    setup = ProfileSetup(mode="logistic", schema=location_schema(list(DEFAULT_TERMS)))
    with caplog.at_level(logging.WARNING):
        model, info = setup.build(snap)
    assert isinstance(model, FixedOddsModel)
    assert info["profile_model"] == "fixed_odds_fallback"
    assert "fixed odds" in caplog.text


def test_logistic_setup_fits_on_geo_users(world):
    setup = ProfileSetup(mode="logistic", schema=location_schema(list(DEFAULT_TERMS)))
    model, info = setup.build(world.snapshot)
    assert info["profile_model"] == "logistic"
    data = setup.training_set(world.snapshot)
    n_geo = sum(v is not None for v in world.snapshot.ground_truth.values())
    assert len(data.y) == n_geo
    # the location-term-in-location-field weight should be clearly positive
    names = setup.schema.names()
    assert model.beta[names.index("term[Sintetica]@location")] > 0
