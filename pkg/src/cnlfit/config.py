"""JSON experiment configs: schemas, validation and default materialization."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

COMMANDS = ("sample", "estimate", "recover", "density", "gap")


class ConfigError(ValueError):
    """Config file unreadable or not matching its schema."""


def _num(default=None, minimum=None, exclusive=None, nullable=False):
    s = {"type": ["number", "null"] if nullable else "number", "default": default}
    if minimum is not None:
        s["minimum"] = minimum
    if exclusive is not None:
        s["exclusiveMinimum"] = exclusive
    return s


def _int(default=None, minimum=None, nullable=False):
    s = {"type": ["integer", "null"] if nullable else "integer", "default": default}
    if minimum is not None:
        s["minimum"] = minimum
    return s


def _obj(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props, "default": {}}


_FIXED_POINT = _obj({
    "tolerance": _num(1e-8, exclusive=0),
    "max_iterations": _int(100_000, 1),
})
_ADAM = _obj({
    "alpha": _num(1e-4, exclusive=0),
    "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1, "default": 0.9},
    "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1, "default": 0.999},
    "eps": _num(1e-8, exclusive=0),
})
_QUADRATURE = _obj({"L": _num(50.0, exclusive=0), "n": _int(2001, 2)})
_VECTOR = {"type": ["array", "null"], "items": {"type": "number"}, "default": None}
# Ground truth: explicit parameters, or drawn as in the experiments when left null.
_TRUTH = _obj({
    "v": _VECTOR,
    "a": _VECTOR,
    "sigma": _num(None, nullable=True),
    "half_width": _num(0.1, exclusive=0),
    "d_true": _int(None, 0, nullable=True),
    "lambda_min": {"type": "number", "minimum": 0, "maximum": 1, "default": 0.0},
    "sigma_true": _num(0.1, minimum=0),
})

_COMMON = {
    "model": {"enum": ["cw", "spn"], "default": "cw"},
    "p": _int(50, 1),
    "d": _int(50, 1),
    "field": {"enum": ["real", "complex"], "default": "real"},
    "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1,
              "default": [0]},
    "output": {"type": ["string", "null"], "default": None},
    "fixed_point": _FIXED_POINT,
}

_OPTIM = {
    "M": _num(None, exclusive=0, nullable=True),
    "gamma": _num(0.1, exclusive=0),
    "N": _int(None, 1, nullable=True),
    "adam": _ADAM,
    "record_every": _int(100, 1),
    "failure_budget": _int(10, 1),
    "init": {"enum": ["eigenvalues", "sqrt-eigenvalues"], "default": "eigenvalues"},
}

_SPECIFIC = {
    "sample": {"truth": _TRUTH},
    "estimate": {
        **_OPTIM,
        "truth": _TRUTH,
        "xi": _num(0.0, minimum=0),
        "sample_path": {"type": ["string", "null"], "default": None},
    },
    "recover": {
        **_OPTIM,
        "model": {"const": "spn", "default": "spn"},
        "xi": _num(1e-3, minimum=0),
        "xi0": _num(None, minimum=0, nullable=True),
        "delta": _num(0.1, exclusive=0),
        "d_true": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1,
                   "default": [10, 40]},
        "lambda_min": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                       "minItems": 1, "default": [0.3, 0.4]},
        "sigma_true": _num(0.1, minimum=0),
        "timing": {"type": "boolean", "default": True},
    },
    "density": {
        "truth": _TRUTH,
        "gamma": _num(0.1, exclusive=0),
        "grid": _obj({"x_min": _num(-1.0), "x_max": _num(5.0), "points": _int(601, 2)}),
        "sample_path": {"type": ["string", "null"], "default": None},
    },
    "gap": {
        "truth": _TRUTH,
        "gamma": _num(0.1, exclusive=0),
        "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1,
                 "default": [50, 200]},
        "theta": {"enum": ["same", "random"], "default": "same"},
        "quadrature": _QUADRATURE,
    },
}


def schema(command: str) -> dict:
    """JSON schema of the config accepted by ``command``."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    props = {**copy.deepcopy(_COMMON), **copy.deepcopy(_SPECIFIC[command])}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": f"cnlfit {command} config",
        "type": "object",
        "additionalProperties": False,
        "properties": props,
    }


def _fill_defaults(instance: dict, sch: dict) -> dict:
    out = dict(instance)
    for key, sub in sch.get("properties", {}).items():
        if key not in out and "default" in sub:
            out[key] = copy.deepcopy(sub["default"])
        if sub.get("type") == "object" and isinstance(out.get(key), dict):
            out[key] = _fill_defaults(out[key], sub)
    return out


def _where(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        return f"{path + ': ' if path else ''}{err.message}"
    return f"field '{path or '<root>'}': {err.message}"


def materialize(command: str, raw: dict | None = None) -> dict:
    """Validate ``raw`` and return it with every default filled in."""
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    sch = schema(command)
    validator = jsonschema.Draft202012Validator(sch)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(_where(e) for e in errors))
    cfg = _fill_defaults(raw, sch)
    if cfg.get("N") is None and "N" in sch["properties"]:
        cfg["N"] = 400 * cfg["d"]
    if cfg.get("M") is None and "M" in sch["properties"]:
        cfg["M"] = 1.0 if cfg["model"] == "cw" else 1.2
    return cfg


def load(command: str, path: str | Path | None) -> dict:
    if path is None:
        return materialize(command, {})
    text = Path(path).read_text(encoding="utf-8")  # OSError propagates as an I/O failure
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return materialize(command, raw)


def dumps(cfg: dict) -> str:
    """Canonical one-line JSON used in provenance headers."""
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))
