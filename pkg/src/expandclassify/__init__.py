"""Expand-classify collection of location-specific user sets on a follower graph."""
from .engine import ExpandBudget, LocationSpec, ProfileSetup, run
from .features import CategorizerConfig, FeatureSchema, categorize, location_schema
from .graphcut import classify, energy_of, local_probability
from .metrics import roc_auc
from .model import LinkEnergyParams, RelationshipEdge, UserProfile, link_energy
from .snapshot import GeoPoint, Post, Snapshot, load_snapshot, save_snapshot

__version__ = "0.1.0"
