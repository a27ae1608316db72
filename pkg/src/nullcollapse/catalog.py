"""Built-in scenarios with closed-form behaviour.

Each entry is stored as the same JSON document a user would write, so the
catalog doubles as a set of configuration examples.
"""

from __future__ import annotations

import copy

from .config import scenario_from_config
from .nullsurf import Scenario

TWO_PI = "2*pi"

_ANGLES = {"psi": TWO_PI, "x": TWO_PI, "y": TWO_PI}

CATALOG: dict[str, dict] = {
    "misner-t3": {
        "description": (
            "Flat Misner-type torus horizon: g = 2 dt dpsi + t dpsi^2 + dx^2 + dy^2, "
            "H = {t = 0}. Vacuum, divergence-free; h_lam = (lam/4) dpsi^2 + dx^2 + dy^2."
        ),
        "expected": "COLLAPSE_BOUNDED_DIAMETER",
        "coordinates": ["t", "psi", "x", "y"],
        "metric": [
            ["0", "1", "0", "0"],
            [None, "t", "0", "0"],
            [None, None, "1", "0"],
            [None, None, None, "1"],
        ],
        "periods": {"t": None, **_ANGLES},
        "hypersurface": {
            "chart": ["psi", "x", "y"],
            "periods": dict(_ANGLES),
            "embedding": ["0", "psi", "x", "y"],
            "generator": "psi",
        },
        "timelike": ["-(1+t)/2", "1", "0", "0"],
    },
    "ppwave-t3": {
        "description": (
            "pp-wave 2 du dv + sin(x) sin(y) du^2 + dx^2 + dy^2 with H = {u = 0}. "
            "Ricci r_uu = sin x sin y is nonzero but r(Z, .) = 0 on H; h_lam flat."
        ),
        "expected": "COLLAPSE_BOUNDED_DIAMETER",
        "coordinates": ["u", "v", "x", "y"],
        "metric": [
            ["sin(x)*sin(y)", "1", "0", "0"],
            [None, "0", "0", "0"],
            [None, None, "1", "0"],
            [None, None, None, "1"],
        ],
        "periods": {"u": None, "v": TWO_PI, "x": TWO_PI, "y": TWO_PI},
        "hypersurface": {
            "chart": ["v", "x", "y"],
            "periods": {"v": TWO_PI, "x": TWO_PI, "y": TWO_PI},
            "embedding": ["0", "v", "x", "y"],
            "generator": "v",
        },
        "timelike": ["1", "-(1+sin(x)*sin(y))/2", "0", "0"],
    },
    "expanding-t3": {
        "description": (
            "Negative control: Misner-type horizon with transverse scale "
            "a(psi) = 1 + 0.3 sin psi, so theta = 2 a'/a != 0; curvature of h_lam blows up."
        ),
        "expected": "UNBOUNDED_CURVATURE",
        "coordinates": ["t", "psi", "x", "y"],
        "metric": [
            ["0", "1", "0", "0"],
            [None, "t", "0", "0"],
            [None, None, "(1+0.3*sin(psi))^2", "0"],
            [None, None, None, "(1+0.3*sin(psi))^2"],
        ],
        "periods": {"t": None, **_ANGLES},
        "hypersurface": {
            "chart": ["psi", "x", "y"],
            "periods": dict(_ANGLES),
            "embedding": ["0", "psi", "x", "y"],
            "generator": "psi",
        },
        "timelike": ["-(1+t)/2", "1", "0", "0"],
    },
    "minkowski": {
        "description": "Minkowski space diag(-1, 1, 1, 1); no hypersurface.",
        "coordinates": ["t", "x", "y", "z"],
        "metric": [
            ["-1", "0", "0", "0"],
            [None, "1", "0", "0"],
            [None, None, "1", "0"],
            [None, None, None, "1"],
        ],
        "timelike": ["1", "0", "0", "0"],
    },
}

_cache: dict[str, Scenario] = {}


class UnknownScenarioError(KeyError):
    def __str__(self) -> str:
        return f"unknown scenario {self.args[0]!r}; known: {', '.join(CATALOG)}"


def names() -> list[str]:
    return list(CATALOG)


def document(name: str) -> dict:
    if name not in CATALOG:
        raise UnknownScenarioError(name)
    doc = copy.deepcopy(CATALOG[name])
    doc["name"] = name
    return doc


def get(name: str) -> Scenario:
    if name not in _cache:
        _cache[name] = scenario_from_config(document(name), name)
    return _cache[name]
