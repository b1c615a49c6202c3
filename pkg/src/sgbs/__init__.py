"""Simulation-guided beam search and efficient active search for desk-scale routing and scheduling."""

from .eas import EasConfig, active_search, eas, sgbs_eas
from .policy import EasParams, Policy, PolicyParams
from .search import METHODS, SgbsConfig, run_with_budget, sgbs

__all__ = [
    "METHODS",
    "EasConfig",
    "EasParams",
    "Policy",
    "PolicyParams",
    "SgbsConfig",
    "active_search",
    "eas",
    "run_with_budget",
    "sgbs",
    "sgbs_eas",
]
