"""Binary profile features and the fixed-odds profile categorizer.

All string matching is case-insensitive substring matching after
``str.casefold``. Diacritics are not folded.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .model import CATEGORIES, ModelError, UserProfile

FIELDS = ("location", "description", "name", "screen_name")
_ATTR = {
    "location": "location_text",
    "description": "description",
    "name": "name",
    "screen_name": "screen_name",
}

DEFAULT_ODDS = {"A": (50, 1), "B": (1, 25), "C": (1, 2), "D": (1, 5), "E": (1, 8)}


@lru_cache(maxsize=None)
def world_cities() -> tuple:
    """The bundled list of world cities with population over one million."""
    text = resources.files("expandclassify").joinpath("data/world_cities.txt").read_text("utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


class _AnyOf:
    """Case-insensitive "contains any of these strings" matcher."""

    def __init__(self, strings: Iterable[str]):
        folded = sorted({s.casefold() for s in strings if s}, key=lambda s: (-len(s), s))
        self._re = re.compile("|".join(map(re.escape, folded))) if folded else None

    def __call__(self, folded_text: str) -> bool:
        return self._re is not None and self._re.search(folded_text) is not None


# -- schema -----------------------------------------------------------------


@dataclass(frozen=True)
class Feature:
    kind: str  # term | list | empty_location | language | utc_offset | protected | verified | bias
    field: Optional[str] = None
    term: Optional[str] = None
    list_id: Optional[str] = None
    value: object = None

    KINDS = ("term", "list", "empty_location", "language", "utc_offset", "protected", "verified", "bias")

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple
    lists: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        for f in self.features:
            if f.kind not in Feature.KINDS:
                raise ModelError(f"unknown feature kind {f.kind!r}")
            if f.kind in ("term", "list") and f.field not in FIELDS:
                raise ModelError(f"unknown profile field {f.field!r}")
            if f.kind == "list" and f.list_id not in self.lists:
                raise ModelError(f"feature refers to unknown list {f.list_id!r}")

    def __len__(self):
        return len(self.features)

    def names(self) -> list:
        out = []
        for f in self.features:
            if f.kind == "term":
                out.append(f"term[{f.term}]@{f.field}")
            elif f.kind == "list":
                out.append(f"list[{f.list_id}]@{f.field}")
            elif f.value is not None:
                out.append(f"{f.kind}={f.value}")
            else:
                out.append(f.kind)
        return out

    def to_dict(self) -> dict:
        return {
            "features": [f.to_dict() for f in self.features],
            "lists": {k: list(v) for k, v in self.lists.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSchema":
        return cls(
            features=tuple(Feature(**f) for f in d["features"]),
            lists={k: tuple(v) for k, v in d.get("lists", {}).items()},
        )


def location_schema(
    w1: Sequence[str],
    w2: Optional[Sequence[str]] = None,
    w2_exclude: Sequence[str] = (),
    language: Optional[str] = None,
    utc_offset: Optional[int] = None,
    bias: bool = False,
) -> FeatureSchema:
    """Build the standard schema: 4 features per W1 term, 4 W2 list features, 5 extras.

    With 12 terms this yields 12*4 + 4 + 5 = 57 features. ``w2`` defaults to
    the bundled world cities list minus ``w2_exclude``.
    """
    if w2 is None:
        w2 = world_cities()
    exclude = {s.casefold() for s in w2_exclude}
    w2 = tuple(s for s in w2 if s.casefold() not in exclude)
    feats = [Feature("term", field=fld, term=t) for t in w1 for fld in FIELDS]
    feats += [Feature("list", field=fld, list_id="W2") for fld in FIELDS]
    feats += [
        Feature("empty_location"),
        Feature("language", value=language),
        Feature("utc_offset", value=utc_offset),
        Feature("protected"),
        Feature("verified"),
    ]
    if bias:
        feats.append(Feature("bias"))
    return FeatureSchema(tuple(feats), {"W2": w2})


def _folded_fields(p: UserProfile) -> dict:
    return {fld: getattr(p, _ATTR[fld]).casefold() for fld in FIELDS}


class _Extractor:
    def __init__(self, schema: FeatureSchema):
        self.schema = schema
        self.matchers = {k: _AnyOf(v) for k, v in schema.lists.items()}
        self.terms = [f.term.casefold() if f.kind == "term" else None for f in schema.features]

    def row(self, p: UserProfile, out: np.ndarray) -> None:
        folded = _folded_fields(p)
        list_hits = {}
        for k, f in enumerate(self.schema.features):
            kind = f.kind
            if kind == "term":
                v = self.terms[k] in folded[f.field]
            elif kind == "list":
                key = (f.list_id, f.field)
                if key not in list_hits:
                    list_hits[key] = self.matchers[f.list_id](folded[f.field])
                v = list_hits[key]
            elif kind == "empty_location":
                v = p.location_text.strip() == ""
            elif kind == "language":
                v = f.value is not None and p.language_code.casefold() == str(f.value).casefold()
            elif kind == "utc_offset":
                v = f.value is not None and p.utc_offset_seconds == f.value
            elif kind == "protected":
                v = p.protected
            elif kind == "verified":
                v = p.verified
            else:
                v = True
            out[k] = 1 if v else 0


def extract_features(profile: UserProfile, schema: FeatureSchema) -> np.ndarray:
    """Binary feature vector for one profile, aligned to ``schema``."""
    out = np.zeros(len(schema), dtype=np.uint8)
    _Extractor(schema).row(profile, out)
    return out


def feature_matrix(profiles: Sequence[UserProfile], schema: FeatureSchema) -> np.ndarray:
    ex = _Extractor(schema)
    X = np.zeros((len(profiles), len(schema)), dtype=np.uint8)
    for i, p in enumerate(profiles):
        ex.row(p, X[i])
    return X


# -- fixed-odds categorization ---------------------------------------------


@dataclass(frozen=True)
class CategorizerConfig:
    """Lists driving the A-E categorization.

    ``t1`` holds conjunctions: a profile meets an entry when every string of
    the entry appears in at least one of its four text fields.
    """

    t1: tuple = ()
    t2: tuple = ()
    t3: tuple = ()
    world_cities: Optional[tuple] = None
    exclude_cities: tuple = ()
    odds: Mapping[str, tuple] = field(default_factory=lambda: dict(DEFAULT_ODDS))

    def __post_init__(self):
        object.__setattr__(self, "t1", tuple(tuple([c] if isinstance(c, str) else c) for c in self.t1))
        object.__setattr__(self, "t2", tuple(self.t2))
        object.__setattr__(self, "t3", tuple(self.t3))
        object.__setattr__(self, "exclude_cities", tuple(self.exclude_cities))
        if self.world_cities is not None:
            object.__setattr__(self, "world_cities", tuple(self.world_cities))
        for c in CATEGORIES:
            if c not in self.odds:
                raise ModelError(f"odds table is missing category {c}")
            num, den = self.odds[c]
            if not (num > 0 and den > 0):
                raise ModelError(f"odds for category {c} must be positive")

    def cities(self) -> tuple:
        base = world_cities() if self.world_cities is None else self.world_cities
        exclude = {s.casefold() for s in self.exclude_cities}
        return tuple(s for s in base if s.casefold() not in exclude)

    def to_dict(self) -> dict:
        return {
            "t1": [list(c) for c in self.t1],
            "t2": list(self.t2),
            "t3": list(self.t3),
            "world_cities": None if self.world_cities is None else list(self.world_cities),
            "exclude_cities": list(self.exclude_cities),
            "odds": {k: list(v) for k, v in self.odds.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CategorizerConfig":
        odds = {k: tuple(v) for k, v in d.get("odds", DEFAULT_ODDS).items()}
        return cls(
            t1=tuple(d.get("t1", ())),
            t2=tuple(d.get("t2", ())),
            t3=tuple(d.get("t3", ())),
            world_cities=d.get("world_cities"),
            exclude_cities=tuple(d.get("exclude_cities", ())),
            odds=odds,
        )


_COMPILED: dict = {}


def _compiled(config: CategorizerConfig):
    hit = _COMPILED.get(id(config))
    if hit is not None and hit[0] is config:
        return hit[1]
    t1 = [tuple(s.casefold() for s in conj) for conj in config.t1]
    t3 = {s.strip().casefold() for s in config.t3}
    compiled = t1, _AnyOf(config.cities()), _AnyOf(config.t2), t3
    if len(_COMPILED) > 256:
        _COMPILED.clear()
    _COMPILED[id(config)] = (config, compiled)
    return compiled


def categorize(profile: UserProfile, config: CategorizerConfig) -> str:
    """Assign category A-E; the first matching rule wins."""
    t1, cities, t2, t3 = _compiled(config)
    folded = _folded_fields(profile)
    texts = folded.values()
    for conj in t1:
        if all(any(s in t for t in texts) for s in conj):
            return "A"
    if cities(folded["location"]):
        return "B"
    if any(t2(t) for t in texts):
        return "C"
    loc = folded["location"].strip()
    if loc == "" or loc in t3:
        return "D"
    return "E"


def fixed_odds_delta(category: str, odds_table: Mapping[str, tuple]) -> float:
    try:
        num, den = odds_table[category]
    except KeyError:
        raise ModelError(f"no odds for category {category!r}") from None
    return math.log(num) - math.log(den)
