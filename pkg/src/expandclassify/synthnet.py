"""Synthetic two-block social network with planted location homophily.

Users ``0 .. n_in-1`` live in the target location, the next ``n_out`` users
do not, and ``hub_count`` high-degree "celebrity" accounts follow. Directed
edges appear with probability ``p_in`` inside the in-location block and
``p_out`` everywhere else. Profile text only carries location signal through
the W1 terms (``term_tp`` / ``term_fp``); every other profile attribute is
drawn from the same distribution for both blocks.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from typing import Dict, List, Optional, Sequence

import numpy as np

from .engine import LocationSpec, haversine_miles, label_ground_truth
from .features import world_cities
from .model import RelationshipEdge, UserId, UserProfile
from .snapshot import GeoPoint, Post, Snapshot

DEFAULT_TERMS = ("Villa Sintetica", "Sintetica", "Valle Sintetico")
_VOCAB = (
    "hola buenos dias gracias futbol partido musica fiesta trabajo familia amigos lluvia sol cafe "
    "noticias gobierno escuela mercado iglesia feliz semana mañana noche ciudad pueblo calle"
).split()
_GENERIC_LOCATIONS = ("Earth", "somewhere", "home", "Latinoamérica", "en mi casa", "planeta tierra")


@dataclass(frozen=True)
class SynthConfig:
    n_in: int = 200
    n_out: int = 2000
    p_in: float = 0.05
    p_out: float = 0.001
    term_tp: float = 0.6
    term_fp: float = 0.01
    geo_rate_in: float = 0.3
    geo_rate_out: float = 0.3
    noise_flip: float = 0.05
    hub_count: int = 3
    hub_degree: int = 200
    terms: tuple = DEFAULT_TERMS
    center: tuple = (3.174159, -76.25880)
    radius_miles: float = 7.0
    posts_per_user: int = 3
    start_date: str = "2017-05-01"
    days: int = 30
    burst_term: Optional[str] = None
    burst_date: Optional[str] = None
    burst_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("p_in", "p_out", "term_tp", "term_fp", "geo_rate_in", "geo_rate_out", "noise_flip", "burst_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError("n_in and n_out must be >= 1")
        if self.hub_count < 0 or self.hub_degree < 0:
            raise ValueError("hub_count and hub_degree must be >= 0")
        if self.hub_degree > self.n_in + self.n_out:
            raise ValueError("hub_degree exceeds the number of regular users")
        if not self.terms:
            raise ValueError("at least one location term is required")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "center", tuple(self.center))

    @property
    def location(self) -> LocationSpec:
        return LocationSpec("synthetic", GeoPoint(*self.center), self.radius_miles)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["terms"] = list(self.terms)
        d["center"] = list(self.center)
        return d


@dataclass
class SynthWorld:
    config: SynthConfig
    snapshot: Snapshot
    membership: Dict[UserId, int]
    followers_of: Dict[UserId, List[UserId]] = field(repr=False)
    friends_of: Dict[UserId, List[UserId]] = field(repr=False)


def _distinct_pairs(rng, n_rows: int, n_cols: int, p: float, same_block: bool):
    """Bernoulli(p) sample of ordered (row, col) pairs, excluding row == col within a block."""
    cols = n_cols - 1 if same_block else n_cols
    total = n_rows * cols
    if total <= 0 or p <= 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    m = int(rng.binomial(total, p))
    if m == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if m > total // 4:
        picked = np.flatnonzero(rng.random(total) < m / total)
    else:
        picked = np.unique(rng.integers(0, total, size=int(m * 1.1) + 16))
        while len(picked) < m:
            picked = np.unique(np.r_[picked, rng.integers(0, total, size=m)])
        picked = np.sort(rng.choice(picked, size=m, replace=False))
    r, c = np.divmod(picked, cols)
    if same_block:
        c = c + (c >= r)
    return r, c


def _destination(center: GeoPoint, dist_miles: float, bearing: float) -> GeoPoint:
    d = dist_miles / 3958.8
    lat1, lon1 = math.radians(center.lat), math.radians(center.lon)
    lat2 = math.asin(math.sin(lat1) * math.cos(d) + math.cos(lat1) * math.sin(d) * math.cos(bearing))
    lon2 = lon1 + math.atan2(math.sin(bearing) * math.sin(d) * math.cos(lat1), math.cos(d) - math.sin(lat1) * math.sin(lat2))
    lon = (math.degrees(lon2) + 540.0) % 360.0 - 180.0
    return GeoPoint(round(math.degrees(lat2), 6), round(lon, 6))


def _geo_point(spec: LocationSpec, inside: bool, bearing: float, u: float) -> GeoPoint:
    """Point at ``bearing``; ``u`` in [0, 1) picks an area-uniform distance."""
    if inside:
        # shrink slightly so rounding never pushes a point past the radius
        dist = 0.98 * spec.radius_miles * math.sqrt(u)
    else:
        lo, hi = 100.0, 1000.0
        dist = math.sqrt(lo * lo + u * (hi * hi - lo * lo))
    return _destination(spec.center, dist, float(bearing))


def generate(config: SynthConfig = SynthConfig()) -> SynthWorld:
    rng = np.random.default_rng(config.seed)
    n_in, n_out, n_hub = config.n_in, config.n_out, config.hub_count
    n_reg = n_in + n_out
    n = n_reg + n_hub
    spec = config.location

    tails, heads = [], []
    blocks = [(0, n_in), (n_in, n_out)]
    for a, (a0, na) in enumerate(blocks):
        for b, (b0, nb) in enumerate(blocks):
            p = config.p_in if a == 0 and b == 0 else config.p_out
            r, c = _distinct_pairs(rng, na, nb, p, a == b)
            tails.append(r + a0)
            heads.append(c + b0)
    for h in range(n_hub):
        fans = np.sort(rng.choice(n_reg, size=config.hub_degree, replace=False))
        tails.append(fans)
        heads.append(np.full(len(fans), n_reg + h, np.int64))
    tails = np.concatenate(tails).astype(np.int64)
    heads = np.concatenate(heads).astype(np.int64)
    order = np.lexsort((heads, tails))
    tails, heads = tails[order], heads[order]
    out_deg = np.bincount(tails, minlength=n)
    in_deg = np.bincount(heads, minlength=n)

    membership = np.zeros(n, np.int64)
    membership[:n_in] = 1
    is_in = membership == 1
    is_hub = np.arange(n) >= n_reg
    cities = world_cities()
    terms = config.terms
    vocab = np.array(_VOCAB)

    # per-user draws, all vectorized
    has_term = rng.random(n) < np.where(is_in, config.term_tp, config.term_fp)
    r_loc = rng.random(n)
    term_pick = rng.integers(0, len(terms), size=n)
    suffix_on = rng.random(n) < 0.5
    suffix_pick = rng.integers(0, 3, size=n)
    generic_pick = rng.integers(0, len(_GENERIC_LOCATIONS), size=n)
    city_pick = rng.integers(0, len(cities), size=n)
    name_words = vocab[rng.integers(0, len(vocab), size=(n, 2))]
    desc_len = rng.integers(0, 6, size=n)
    desc_words = vocab[rng.integers(0, len(vocab), size=(n, 5))]
    language = np.array(("es", "en", "pt"))[rng.choice(3, size=n, p=(0.6, 0.3, 0.1))]
    utc = np.array((-18000, -14400, 0))[rng.integers(0, 3, size=n)]
    protected = rng.random(n) < 0.05
    verified = is_hub | (rng.random(n) < 0.01)

    ppu = config.posts_per_user
    geo_rate = np.where(is_in, config.geo_rate_in, config.geo_rate_out)
    has_geo = (rng.random(n) < geo_rate) & (ppu > 0)
    geo_slot = np.where(has_geo, rng.integers(0, max(ppu, 1), size=n), -1)
    # travelers: in-location users sometimes post from far away
    geo_inside = is_in & ~(rng.random(n) < config.noise_flip)
    bearing = rng.uniform(0, 2 * math.pi, size=n)
    u_dist = rng.random(n)

    n_posts = n * ppu
    day = rng.integers(0, max(config.days, 1), size=n_posts)
    n_words = rng.integers(3, 9, size=n_posts)
    words = vocab[rng.integers(0, len(vocab), size=(n_posts, 8))]
    burst_coin = rng.random(n_posts) < config.burst_rate
    burst_pos = rng.random(n_posts)
    hour = rng.integers(0, 24, size=n_posts)

    start = date.fromisoformat(config.start_date)
    burst_day = (date.fromisoformat(config.burst_date) - start).days if config.burst_date else None
    dates = [(start + timedelta(days=k)).isoformat() for k in range(max(config.days, 1))]

    snap = Snapshot()
    for u in range(n):
        if is_hub[u]:
            location, name = cities[city_pick[u]].title(), f"Famous Account {u - n_reg}"
        else:
            if has_term[u]:
                location = terms[term_pick[u]]
                if suffix_on[u]:
                    location += ", " + ("Colombia", "Cauca", "CO")[suffix_pick[u]]
            elif r_loc[u] < 0.4:
                location = ""
            elif r_loc[u] < 0.7:
                location = _GENERIC_LOCATIONS[generic_pick[u]]
            else:
                location = cities[city_pick[u]].title()
            name = " ".join(name_words[u]).title()
        profile = UserProfile(
            id=u,
            screen_name=f"user{u}",
            name=name,
            description=" ".join(desc_words[u, : desc_len[u]]),
            location_text=location,
            language_code=str(language[u]),
            utc_offset_seconds=int(utc[u]),
            protected=bool(protected[u]),
            verified=bool(verified[u]),
            friends_count=int(out_deg[u]),
            followers_count=int(in_deg[u]),
        )
        snap.add_user(profile)

        posts = []
        for k in range(ppu):
            j = u * ppu + k
            w = list(words[j, : n_words[j]])
            if burst_day is not None and config.burst_term and day[j] == burst_day and burst_coin[j]:
                w.insert(int(burst_pos[j] * (len(w) + 1)), config.burst_term)
            geo = _geo_point(spec, bool(geo_inside[u]), bearing[u], u_dist[u]) if k == geo_slot[u] else None
            posts.append(Post(u, " ".join(w), geo, f"{dates[day[j]]}T{hour[j]:02d}:00:00"))
        snap.posts[u] = posts
        snap.ground_truth[u] = label_ground_truth(posts, spec)

    t_list, h_list = tails.tolist(), heads.tolist()
    for t, h in zip(t_list, h_list):
        snap.add_edge(RelationshipEdge(t, h, int(out_deg[t]), int(in_deg[h])))

    followers_of: Dict[UserId, List[UserId]] = {u: [] for u in range(n)}
    friends_of: Dict[UserId, List[UserId]] = {u: [] for u in range(n)}
    for t, h in zip(t_list, h_list):
        friends_of[t].append(h)
        followers_of[h].append(t)
    for lst in followers_of.values():
        lst.sort()
    return SynthWorld(config, snap, dict(enumerate(membership.tolist())), followers_of, friends_of)


class SyntheticSource:
    """Read-only DataSource view of a generated world (or any snapshot)."""

    def __init__(self, snapshot: Snapshot, followers_of=None, friends_of=None):
        self.snapshot = snapshot
        if followers_of is None or friends_of is None:
            followers_of = {u: [] for u in snapshot.users}
            friends_of = {u: [] for u in snapshot.users}
            for e in snapshot.edges:
                friends_of[e.follower].append(e.friend)
                followers_of[e.friend].append(e.follower)
        self._followers = followers_of
        self._friends = friends_of
        self._folded = None

    def user_search(self, query: str, limit: int = 1000) -> List[UserProfile]:
        if self._folded is None:
            self._folded = [
                (p, " \x00 ".join((p.location_text, p.description, p.name, p.screen_name)).casefold())
                for p in self.snapshot.users.values()
            ]
        q = query.casefold()
        return [p for p, text in self._folded if q in text][: min(limit, 1000)]

    def followers(self, user_id: UserId, limit: int = 5000) -> List[UserId]:
        return list(self._followers.get(user_id, ())[: min(limit, 5000)])

    def friends(self, user_id: UserId, limit: int = 5000) -> List[UserId]:
        return list(self._friends.get(user_id, ())[: min(limit, 5000)])

    def profiles(self, ids: Sequence[UserId]) -> List[UserProfile]:
        users = self.snapshot.users
        return [users[u] for u in ids if u in users]

    def recent_posts(self, user_id: UserId, limit: int = 200) -> List[Post]:
        return list(self.snapshot.posts.get(user_id, ())[:limit])


def as_data_source(world) -> SyntheticSource:
    if isinstance(world, SynthWorld):
        return SyntheticSource(world.snapshot, world.followers_of, world.friends_of)
    return SyntheticSource(world)
