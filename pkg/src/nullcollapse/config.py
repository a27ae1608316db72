"""JSON scenario documents: schema validation and conversion to ``Scenario``."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema

from .chartgeom import LORENTZIAN, Chart, MetricSpec
from .expr import ExprError, evaluate, parse
from .nullsurf import Embedding, Scenario


class ConfigError(Exception):
    pass


_EXPR = {"type": "string", "minLength": 1}
_EXPR_OR_NULL = {"type": ["string", "null"]}
_PERIOD = {"type": ["number", "string", "null"]}

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["coordinates", "metric"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "expected": {"type": "string"},
        "coordinates": {
            "type": "array",
            "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z_0-9]*$"},
            "minItems": 4,
            "maxItems": 4,
            "uniqueItems": True,
        },
        "metric": {
            "type": "array",
            "minItems": 4,
            "maxItems": 4,
            "items": {"type": "array", "minItems": 4, "maxItems": 4, "items": _EXPR_OR_NULL},
        },
        "periods": {"type": "object", "additionalProperties": _PERIOD},
        "hypersurface": {
            "type": "object",
            "required": ["chart", "embedding", "generator"],
            "properties": {
                "chart": {
                    "type": "array",
                    "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z_0-9]*$"},
                    "minItems": 3,
                    "maxItems": 3,
                    "uniqueItems": True,
                },
                "periods": {"type": "object", "additionalProperties": _PERIOD},
                "embedding": {"type": "array", "items": _EXPR, "minItems": 4, "maxItems": 4},
                "generator": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "timelike": {"type": "array", "items": _EXPR, "minItems": 4, "maxItems": 4},
    },
    "additionalProperties": False,
}


def _schema_error(err: jsonschema.ValidationError) -> ConfigError:
    path = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return ConfigError(f"schema violation at {path}: {err.message}")


def _period(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, str):
        value = float(evaluate(parse(value), {}))
    value = float(value)
    if not value > 0:
        raise ConfigError(f"period must be positive, got {value}")
    return value


def _expr(text: str, where: str):
    try:
        return parse(text)
    except ExprError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def scenario_from_config(doc: dict, name: str | None = None) -> Scenario:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(err) from None
    coords = doc["coordinates"]
    periods = doc.get("periods", {})
    try:
        chart = Chart(tuple(coords), tuple(_period(periods.get(c)) for c in coords))
    except (ValueError, ExprError) as exc:
        raise ConfigError(f"periods: {exc}") from None
    rows = []
    for a in range(4):
        row = []
        for b in range(4):
            text = doc["metric"][min(a, b)][max(a, b)]
            if text is None:
                raise ConfigError(f"metric/{min(a, b)}/{max(a, b)}: upper triangle entry required")
            row.append(_expr(text, f"metric/{min(a, b)}/{max(a, b)}"))
        rows.append(tuple(row))
    metric = MetricSpec(chart, tuple(rows), LORENTZIAN)

    embedding = timelike = None
    hs = doc.get("hypersurface")
    if hs is not None:
        if hs["generator"] not in hs["chart"]:
            raise ConfigError("hypersurface/generator: must name a chart coordinate")
        hp = hs.get("periods", {})
        try:
            schart = Chart(tuple(hs["chart"]), tuple(_period(hp.get(c)) for c in hs["chart"]))
        except (ValueError, ExprError) as exc:
            raise ConfigError(f"hypersurface/periods: {exc}") from None
        embedding = Embedding(
            schart,
            tuple(_expr(t, f"hypersurface/embedding/{i}") for i, t in enumerate(hs["embedding"])),
            hs["generator"],
        )
        if "timelike" not in doc:
            raise ConfigError("timelike: required when a hypersurface is given")
    if "timelike" in doc:
        timelike = tuple(_expr(t, f"timelike/{i}") for i, t in enumerate(doc["timelike"]))
    return Scenario(
        name=name or doc.get("name", "user"),
        metric=metric,
        embedding=embedding,
        timelike=timelike,
        doc=doc.get("description", ""),
        expected=doc.get("expected"),
    )


def load_scenario_file(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    if not isinstance(doc, dict):
        raise ConfigError("schema violation at <root>: scenario must be a JSON object")
    return scenario_from_config(doc, doc.get("name", path.stem))
