"""Provable lower bounds on the size of multi-way joins over one shared key."""
from .bounds import BoundResult, clip, estimate, q_error
from .builder import build_catalog, build_catalog_from_plan
from .model import (
    BuildConfig,
    JoinQuery,
    RelationRef,
    StatisticsCatalog,
    load_catalog,
    save_catalog,
)

__all__ = [
    "BoundResult",
    "BuildConfig",
    "JoinQuery",
    "RelationRef",
    "StatisticsCatalog",
    "build_catalog",
    "build_catalog_from_plan",
    "clip",
    "estimate",
    "load_catalog",
    "q_error",
    "save_catalog",
]

__version__ = "0.1.0"
