"""Collapsing Riemannian metrics from compact divergence-free null hypersurfaces."""

from . import catalog
from .catalog import get as get_scenario
from .collapse import build_family, normalize_timelike
from .expr import differentiate, evaluate, parse, simplify
from .scan import hypothesis_check, scan

__version__ = "0.1.0"

__all__ = [
    "build_family",
    "catalog",
    "differentiate",
    "evaluate",
    "get_scenario",
    "hypothesis_check",
    "normalize_timelike",
    "parse",
    "scan",
    "simplify",
]
