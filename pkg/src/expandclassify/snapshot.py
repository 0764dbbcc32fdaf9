"""Dataset snapshot and its on-disk format.

A snapshot directory holds::

    users.jsonl   one profile per line (plus ground_truth / label keys)
    edges.csv     follower_id,friend_id,z1,z2
    posts.jsonl   user_id, text, lat, lon, timestamp (lat/lon null when absent)
    meta.json     iteration, seeds, rng state
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .model import RelationshipEdge, UserId, UserProfile


class SnapshotFormatError(ValueError):
    """Malformed snapshot file; the message carries the file and line number."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"invalid coordinates ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class Post:
    user_id: UserId
    text: str
    geo: Optional[GeoPoint] = None
    timestamp: str = ""


@dataclass
class Snapshot:
    users: Dict[UserId, UserProfile] = field(default_factory=dict)
    edges: List[RelationshipEdge] = field(default_factory=list)
    posts: Dict[UserId, List[Post]] = field(default_factory=dict)
    ground_truth: Dict[UserId, Optional[int]] = field(default_factory=dict)
    labels: Dict[UserId, int] = field(default_factory=dict)
    iteration: int = 0
    seeds: List[UserId] = field(default_factory=list)
    rng_state: Optional[dict] = None
    _edge_keys: set = field(default_factory=set, repr=False, compare=False)

    def __post_init__(self):
        self._edge_keys = {(e.follower, e.friend) for e in self.edges}
        if len(self._edge_keys) != len(self.edges):
            raise ValueError("duplicate edge in snapshot")

    def add_user(self, profile: UserProfile) -> bool:
        if profile.id in self.users:
            return False
        self.users[profile.id] = profile
        return True

    def add_edge(self, edge: RelationshipEdge) -> bool:
        key = (edge.follower, edge.friend)
        if key in self._edge_keys:
            return False
        if edge.follower not in self.users or edge.friend not in self.users:
            raise ValueError(f"edge {key} references an unknown user")
        self._edge_keys.add(key)
        self.edges.append(edge)
        return True

    def has_edge(self, follower: UserId, friend: UserId) -> bool:
        return (follower, friend) in self._edge_keys

    def check(self) -> None:
        for e in self.edges:
            if e.follower not in self.users or e.friend not in self.users:
                raise ValueError(f"edge ({e.follower!r}, {e.friend!r}) references an unknown user")


# -- persistence --------------------------------------------------------------

_PROFILE_FIELDS = [f.name for f in dataclasses.fields(UserProfile)]


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def save_snapshot(snapshot: Snapshot, path) -> None:
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "users.jsonl"), "w", encoding="utf-8") as fh:
        for uid, p in snapshot.users.items():
            row = {name: getattr(p, name) for name in _PROFILE_FIELDS}
            row["ground_truth"] = snapshot.ground_truth.get(uid)
            row["label"] = snapshot.labels.get(uid)
            fh.write(json.dumps(row, ensure_ascii=False, default=_json_default) + "\n")
    with open(os.path.join(path, "edges.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["follower_id", "friend_id", "z1", "z2"])
        for e in snapshot.edges:
            w.writerow([e.follower, e.friend, "" if e.z1 is None else e.z1, "" if e.z2 is None else e.z2])
    with open(os.path.join(path, "posts.jsonl"), "w", encoding="utf-8") as fh:
        for uid, posts in snapshot.posts.items():
            for post in posts:
                row = {
                    "user_id": uid,
                    "text": post.text,
                    "lat": None if post.geo is None else post.geo.lat,
                    "lon": None if post.geo is None else post.geo.lon,
                    "timestamp": post.timestamp,
                }
                fh.write(json.dumps(row, ensure_ascii=False, default=_json_default) + "\n")
    meta = {
        "iteration": snapshot.iteration,
        "seeds": list(snapshot.seeds),
        "rng_state": snapshot.rng_state,
        # posts.jsonl cannot say "fetched, no posts", so record it here
        "users_with_posts": [uid for uid in snapshot.posts],
    }
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, ensure_ascii=False, sort_keys=True, default=_json_default)
        fh.write("\n")


def _read_jsonl(fname):
    with open(fname, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SnapshotFormatError(f"{fname}:{lineno}: {exc.msg}") from None


def load_snapshot(path) -> Snapshot:
    snap = Snapshot()
    by_text: Dict[str, UserId] = {}
    fname = os.path.join(path, "users.jsonl")
    for lineno, row in _read_jsonl(fname):
        try:
            profile = UserProfile(**{k: row[k] for k in _PROFILE_FIELDS if k in row})
        except (TypeError, ValueError) as exc:
            raise SnapshotFormatError(f"{fname}:{lineno}: {exc}") from None
        if not snap.add_user(profile):
            raise SnapshotFormatError(f"{fname}:{lineno}: duplicate user id {profile.id!r}")
        by_text[str(profile.id)] = profile.id
        if "ground_truth" in row:
            snap.ground_truth[profile.id] = row["ground_truth"]
        if row.get("label") is not None:
            snap.labels[profile.id] = row["label"]

    def uid(text, fname, lineno):
        try:
            return by_text[text]
        except KeyError:
            raise SnapshotFormatError(f"{fname}:{lineno}: unknown user id {text!r}") from None

    fname = os.path.join(path, "edges.csv")
    with open(fname, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["follower_id", "friend_id", "z1", "z2"]:
            raise SnapshotFormatError(f"{fname}:1: bad header {header!r}")
        for lineno, row in enumerate(reader, 2):
            if len(row) != 4:
                raise SnapshotFormatError(f"{fname}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                z1 = int(row[2]) if row[2] != "" else None
                z2 = int(row[3]) if row[3] != "" else None
                edge = RelationshipEdge(uid(row[0], fname, lineno), uid(row[1], fname, lineno), z1, z2)
            except ValueError as exc:
                if isinstance(exc, SnapshotFormatError):
                    raise
                raise SnapshotFormatError(f"{fname}:{lineno}: {exc}") from None
            if not snap.add_edge(edge):
                raise SnapshotFormatError(f"{fname}:{lineno}: duplicate edge")

    fname = os.path.join(path, "meta.json")
    try:
        with open(fname, encoding="utf-8") as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"{fname}:{exc.lineno}: {exc.msg}") from None
    for u in meta.get("users_with_posts", []):
        snap.posts[u] = []

    fname = os.path.join(path, "posts.jsonl")
    for lineno, row in _read_jsonl(fname):
        try:
            owner = row["user_id"]
            if owner not in snap.users:
                raise SnapshotFormatError(f"{fname}:{lineno}: unknown user id {owner!r}")
            geo = None if row["lat"] is None else GeoPoint(row["lat"], row["lon"])
            post = Post(owner, row["text"], geo, row.get("timestamp", ""))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SnapshotFormatError):
                raise
            raise SnapshotFormatError(f"{fname}:{lineno}: {exc!r}") from None
        snap.posts.setdefault(owner, []).append(post)

    snap.iteration = meta.get("iteration", 0)
    snap.seeds = list(meta.get("seeds", []))
    snap.rng_state = meta.get("rng_state")
    return snap
