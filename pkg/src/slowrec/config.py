"""Run configuration: JSON schema, validation and resolution of defaults."""

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .models import model_from_dict

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT1 = {"type": "integer", "minimum": 1}

_MODEL = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"enum": ["power_drift", "bessel", "critical_gwi", "state_dep_gw",
                            "non_markov_r", "power_drift_lattice"]},
        "c": _NUM, "gamma": _NUM, "d": _NUM,
        "noise": {"enum": ["gaussian", "two_point"]},
        "delta": _NUM,
        "offspring": {"enum": ["geometric", "poisson"]},
        "sigma2": _NUM,
        "base_law_override": {"type": ["array", "null"], "items": _NUM,
                              "minItems": 4, "maxItems": 4},
        "K": _NUM,
        "cap": {"type": ["number", "null"]},
    },
    "additionalProperties": False,
}

_GRID = {
    "oneOf": [
        {"type": "array", "items": _INT1, "minItems": 1},
        {
            "type": "object",
            "properties": {
                "policy": {"const": "geometric"},
                "points": {"type": "integer", "minimum": 2},
                "start": _INT1,
            },
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["model"],
    "properties": {
        "model": _MODEL,
        "run": {
            "type": "object",
            "properties": {
                "x0": {"type": "number", "minimum": 0},
                "A": {"type": "number", "minimum": 0},
                "horizon": _INT1,
                "trajectories": _INT1,
                "seed": {"type": "integer", "minimum": 0},
                "n_grid": _GRID,
                "cap": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "analysis": {
            "type": "object",
            "properties": {
                "alpha": _POS,
                "beta": _POS,
                "window": {"type": "array", "items": _INT1, "minItems": 2, "maxItems": 2},
                "drift_x": {"type": "array", "items": _POS, "minItems": 1},
                "drift_alphas": {"type": "array", "items": _POS, "minItems": 1},
                "samples": {"type": "integer", "minimum": 2},
                "n_max": _INT1,
                "tv_grid": {"type": "array", "items": {"type": "integer", "minimum": 0},
                            "minItems": 1},
                "accuracy": _POS,
                "tol": _POS,
                "transform_x": {"type": "array", "items": {"type": "number", "minimum": 1},
                                "minItems": 1},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json", "svg"]},
                            "uniqueItems": True},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "run": {"x0": 50, "A": 10, "horizon": 20000, "trajectories": 200000, "seed": 0,
            "n_grid": {"policy": "geometric", "points": 40, "start": 10}},
    "analysis": {"samples": 1000000, "accuracy": 1e-6, "tol": 1e-10},
    "output": {"directory": "out", "formats": ["csv", "json"]},
}


def validate(doc):
    """Check ``doc`` against the schema and that the model section builds.

    Raises
    ------
    ConfigError
        On any schema violation (unknown keys included) or bad parameter.
    """
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    try:
        model_from_dict(doc["model"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config error in model: {exc}") from None
    return doc


def resolve(doc, seed=None, out=None):
    """Validated config with defaults filled in and CLI overrides applied."""
    validate(doc)
    res = copy.deepcopy(doc)
    for section, vals in DEFAULTS.items():
        sec = res.setdefault(section, {})
        for k, v in vals.items():
            sec.setdefault(k, copy.deepcopy(v))
    if seed is not None:
        res["run"]["seed"] = int(seed)
    if out is not None:
        res["output"]["directory"] = str(out)
    validate(res)
    return res


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
