"""JSON experiment configuration.

Example::

    {
      "location": {"name": "Corinto", "center": [3.174159, -76.2588], "radius_miles": 7},
      "link": {"gamma": "log(5)", "alpha1": 500, "alpha2": 5000, "lambda": 0.98},
      "profile_model": "logistic",
      "features": {"w1": ["Corinto", "Cauca"], "language": "es", "utc_offset": -18000},
      "categorizer": {"t1": [["Casimiro de Abreu", "Brasil"]], "t2": [], "t3": []},
      "training": {"C_grid": [0.1, 1, 10], "norm": "l1"},
      "budget": {"users_per_direction": 30, "neighbors_per_user": 5000},
      "run": {"max_iterations": 5, "seed_queries": ["Corinto"]},
      "seed": 0,
      "synthetic": {"n_in": 200, "n_out": 2000}
    }
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields
from typing import List, Optional

from .engine import ExpandBudget, LocationSpec, ProfileSetup
from .features import CategorizerConfig, FeatureSchema, location_schema
from .model import LinkEnergyParams
from .snapshot import GeoPoint
from .synthnet import SynthConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


_LOG = re.compile(r"^\s*log\s*\(\s*([0-9.eE+-]+)\s*\)\s*$")


def parse_number(v) -> float:
    """Accept plain numbers and strings such as ``"0.5"``, ``"log(5)"`` or ``"log5"``."""
    if isinstance(v, bool):
        raise ConfigError(f"not a number: {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        s = v.strip()
        m = _LOG.match(s) or re.match(r"^\s*log\s*([0-9.]+)\s*$", s)
        try:
            return math.log(float(m.group(1))) if m else float(s)
        except ValueError:
            pass
    raise ConfigError(f"not a number: {v!r}")


def _only(d: dict, allowed, where: str) -> dict:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return d


@dataclass
class ExperimentConfig:
    location: LocationSpec
    link: LinkEnergyParams
    setup: ProfileSetup
    budget: ExpandBudget = field(default_factory=ExpandBudget)
    max_iterations: int = 5
    max_seconds: Optional[float] = None
    seed_queries: List[str] = field(default_factory=list)
    seed_ids: list = field(default_factory=list)
    seed: int = 0
    synthetic: Optional[SynthConfig] = None

    @classmethod
    def from_dict(cls, d: dict, seed: Optional[int] = None) -> "ExperimentConfig":
        try:
            return cls._from_dict(d, seed)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def _from_dict(cls, d: dict, seed: Optional[int]) -> "ExperimentConfig":
        _only(d, ("location", "link", "profile_model", "features", "categorizer", "training", "budget", "run",
                  "seed", "synthetic", "schema"), "config")
        seed = int(d.get("seed", 0)) if seed is None else seed

        synthetic = None
        if "synthetic" in d:
            sd = dict(_only(d["synthetic"], [f.name for f in fields(SynthConfig)], "synthetic"))
            sd.setdefault("seed", seed)
            synthetic = SynthConfig(**sd)

        if "location" in d:
            loc = _only(d["location"], ("name", "center", "radius_miles"), "location")
            location = LocationSpec(loc.get("name", ""), GeoPoint(*loc["center"]), float(loc["radius_miles"]))
        elif synthetic is not None:
            location = synthetic.location
        else:
            raise ConfigError("config needs a 'location' (or a 'synthetic' section)")

        link = _only(d.get("link", {}), ("gamma", "alpha1", "alpha2", "lambda"), "link")
        params = LinkEnergyParams(
            gamma=parse_number(link.get("gamma", "log(5)")),
            alpha1=parse_number(link.get("alpha1", 500)),
            alpha2=parse_number(link.get("alpha2", 5000)),
            lam=parse_number(link.get("lambda", 0.98)),
        )

        default_terms = list(synthetic.terms) if synthetic is not None else []
        if "schema" in d:
            schema = FeatureSchema.from_dict(d["schema"])
        else:
            feats = _only(d.get("features", {}), ("w1", "w2", "w2_exclude", "language", "utc_offset", "bias"), "features")
            w1 = feats.get("w1", default_terms)
            schema = location_schema(w1, feats.get("w2"), feats.get("w2_exclude", ()), feats.get("language"),
                                     feats.get("utc_offset"), bool(feats.get("bias", False))) if w1 else None

        categorizer = None
        if "categorizer" in d:
            categorizer = CategorizerConfig.from_dict(
                _only(d["categorizer"], ("t1", "t2", "t3", "world_cities", "exclude_cities", "odds"), "categorizer"))
        elif default_terms:
            categorizer = CategorizerConfig(t2=tuple(default_terms))

        tr = _only(d.get("training", {}), ("C_grid", "norm", "validation_fraction", "max_iterations", "tol"), "training")
        norm = tr.get("norm", "l1")
        train = TrainConfig(C=1.0, norm=norm, max_iterations=int(tr.get("max_iterations", 1000)),
                            tol=float(tr.get("tol", 1e-8)),
                            validation_fraction=float(tr.get("validation_fraction", 0.25)), seed=seed)
        mode = d.get("profile_model", "logistic")
        if mode == "logistic" and schema is None:
            raise ConfigError("logistic profile model needs features.w1 terms")
        setup = ProfileSetup(mode=mode, schema=schema, categorizer=categorizer,
                             C_grid=tuple(parse_number(c) for c in tr.get("C_grid", (0.01, 0.1, 1.0, 10.0))),
                             norm=norm, train=train)

        budget = ExpandBudget(**_only(d.get("budget", {}), [f.name for f in fields(ExpandBudget)], "budget"))
        run = _only(d.get("run", {}), ("max_iterations", "max_seconds", "seed_queries", "seed_ids"), "run")
        queries = list(run.get("seed_queries", default_terms if not run.get("seed_ids") else []))
        return cls(
            location=location,
            link=params,
            setup=setup,
            budget=budget,
            max_iterations=int(run.get("max_iterations", 5)),
            max_seconds=run.get("max_seconds"),
            seed_queries=queries,
            seed_ids=list(run.get("seed_ids", [])),
            seed=seed,
            synthetic=synthetic,
        )


def load_config(path: Optional[str], seed: Optional[int] = None) -> ExperimentConfig:
    """Load a config file; with no path, the default synthetic scenario is used."""
    if path is None:
        return ExperimentConfig.from_dict({"synthetic": {}}, seed)
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(d, seed)
