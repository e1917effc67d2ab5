"""Experiment configuration: JSON schema, loading, and dotted-path overrides.

A configuration is a single JSON object; unknown keys are rejected.  The CLI
can override individual keys with ``--set model.d=20`` style flags, where the
value is parsed as JSON when possible and taken as a string otherwise.
"""

from __future__ import annotations

import json
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError

_POS_NUM = {"type": "number", "exclusiveMinimum": 0}
_NONNEG_NUM = {"type": "number", "minimum": 0}

_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
}

_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "d"],
    "properties": {
        "family": {"enum": ["cosine", "ou-linear"]},
        "d": {"type": "integer", "minimum": 1},
        "p": {"type": "integer", "minimum": 1},
        "s_anchor": _POS_NUM,
        "sparsity_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "nonzero_low": {"type": "number"},
        "nonzero_high": {"type": "number"},
        "A0": _MATRIX,
        "A0_diag": {"type": "array", "minItems": 1, "items": {"type": "number"}},
    },
}

_SAMPLING = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "T": _POS_NUM,
        "delta_n": _POS_NUM,
        "delta_over_t": _POS_NUM,
        "substeps": {"type": "integer", "minimum": 1},
        "burn_in_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "x0": {"type": "number"},
        "stationary_init": {"type": "boolean"},
    },
}

_SOLVER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "tol": _POS_NUM,
        "max_sweeps": {"type": "integer", "minimum": 1},
        "snap": _NONNEG_NUM,
    },
}

_ESTIMATION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lambda": {"oneOf": [_POS_NUM, {"type": "null"}]},
        "lambda_grid": {
            "oneOf": [
                {"type": "array", "minItems": 1, "items": _POS_NUM},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "num": {"type": "integer", "minimum": 1},
                        "ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    },
                },
            ]
        },
        "cv_folds": {"type": "integer", "minimum": 2},
        "solver": _SOLVER,
        "mle_threshold": _NONNEG_NUM,
    },
}

_CONC_LINEAR = {
    "type": "object",
    "additionalProperties": False,
    "required": ["A0", "n", "delta_n", "r_grid", "reps"],
    "properties": {
        "A0": _MATRIX,
        "n": {"type": "integer", "minimum": 2},
        "delta_n": _POS_NUM,
        "r_grid": {"type": "array", "minItems": 1, "items": _NONNEG_NUM},
        "reps": {"type": "integer", "minimum": 1},
        "clip": _POS_NUM,
        "substeps": {"type": "integer", "minimum": 1},
        "burn_in": {"type": "integer", "minimum": 0},
    },
}

_CONC_OU = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "delta_n", "x_grid", "reps"],
    "properties": {
        "A0": _MATRIX,
        "A0_diag": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "n": {"type": "integer", "minimum": 2},
        "delta_n": _POS_NUM,
        "x_grid": {"type": "array", "minItems": 1, "items": _POS_NUM},
        "reps": {"type": "integer", "minimum": 100},
        "n_directions": {"type": "integer", "minimum": 1},
    },
}

_AUDIT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "gamma": _POS_NUM,
        "k": {"oneOf": [_POS_NUM, {"type": "null"}]},
        "c_b": _POS_NUM,
        "M": _POS_NUM,
        "l": _POS_NUM,
        "second_moment": _NONNEG_NUM,
        "reps": {"type": "integer", "minimum": 1},
        "budget": {"type": "integer", "minimum": 1},
        "concentration_linear": _CONC_LINEAR,
        "concentration_ou": _CONC_OU,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "seed"],
    "properties": {
        "experiment": {
            "enum": [
                "support-recovery",
                "dimension-sweep",
                "rate-study",
                "verify-sets",
                "verify-concentration",
                "estimate-single",
                "simulate",
                "cv",
            ]
        },
        "seed": {"type": "integer", "minimum": 0},
        "replications": {"type": "integer", "minimum": 1},
        "jobs": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "cost_budget": _POS_NUM,
        "model": _MODEL,
        "sampling": _SAMPLING,
        "estimation": _ESTIMATION,
        "audit": _AUDIT,
        "p_grid": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "t_grid": {"type": "array", "minItems": 1, "items": _POS_NUM},
    },
}

DEFAULTS: dict[str, Any] = {
    "replications": 1,
    "jobs": 1,
    "cost_budget": 5e9,  # projected fine-step evaluations before a warning
    "sampling": {
        "substeps": 10,
        "burn_in_fraction": 0.1,
        "x0": 0.0,
        "stationary_init": True,
    },
    "estimation": {
        "lambda": None,
        "lambda_grid": {"num": 20, "ratio": 1e-3},
        "cv_folds": 5,
        "solver": {"tol": 1e-9, "max_sweeps": 10000, "snap": 1e-12},
        "mle_threshold": 0.5,
    },
    "audit": {
        "epsilon": 0.1,
        "gamma": 1.0,
        "k": None,
        "c_b": 1.0,
        "reps": 200,
        "budget": 128,
    },
    "model": {
        "sparsity_fraction": 0.7,
        "nonzero_low": 2.0,
        "nonzero_high": 3.0,
    },
}


def _merge_defaults(config: dict, defaults: dict) -> dict:
    out = dict(config)
    for key, val in defaults.items():
        if key not in out:
            out[key] = val
        elif isinstance(val, dict) and isinstance(out[key], dict):
            out[key] = _merge_defaults(out[key], val)
    return out


def validate_config(config: dict) -> dict:
    """Schema-check, then fill defaults; raises ConfigError with a field path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(part) for part in err.absolute_path) or "<root>"
        raise ConfigError(err.message, path=path)
    merged = _merge_defaults(config, DEFAULTS)
    _check_semantics(merged)
    return merged


def _check_semantics(cfg: dict) -> None:
    model = cfg.get("model") or {}
    family = model.get("family")
    if family == "cosine":
        needs_p = cfg["experiment"] != "dimension-sweep"  # p_grid supplies p there
        if needs_p and "p" not in model:
            raise ConfigError("cosine family requires p", path="model.p")
    if family == "ou-linear" and "A0" not in model and "A0_diag" not in model:
        raise ConfigError("ou-linear family requires A0 or A0_diag", path="model.A0")
    needs_model = cfg["experiment"] in (
        "support-recovery",
        "dimension-sweep",
        "rate-study",
        "verify-sets",
        "estimate-single",
        "simulate",
        "cv",
    )
    if needs_model and family is None:
        raise ConfigError("experiment requires a model block", path="model")
    if cfg["experiment"] == "verify-sets" and family != "ou-linear":
        raise ConfigError("verify-sets requires an ou-linear model", path="model.family")
    sampling = cfg.get("sampling")
    if cfg["experiment"] in (
        "support-recovery",
        "dimension-sweep",
        "verify-sets",
        "estimate-single",
        "simulate",
        "cv",
    ):
        if sampling is None or "T" not in sampling or "delta_n" not in sampling:
            raise ConfigError("experiment requires sampling.T and sampling.delta_n", path="sampling")
    if cfg["experiment"] == "dimension-sweep" and "p_grid" not in cfg:
        raise ConfigError("dimension sweep requires p_grid", path="p_grid")
    if cfg["experiment"] == "rate-study":
        if "t_grid" not in cfg:
            raise ConfigError("rate study requires t_grid", path="t_grid")
        if sampling is None or ("delta_n" not in sampling and "delta_over_t" not in sampling):
            raise ConfigError(
                "rate study requires sampling.delta_n or sampling.delta_over_t", path="sampling"
            )


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}", path=path) from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be an object", path=path)
    return raw


def parse_override(item: str) -> tuple[list[str], Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, _, raw = item.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    out = json.loads(json.dumps(config))  # deep copy, JSON-plain
    for item in overrides:
        path, value = parse_override(item)
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError("cannot descend into non-object", path=".".join(path))
        node[path[-1]] = value
    return out


def interaction_matrix(model: dict) -> np.ndarray:
    if "A0" in model:
        a = np.asarray(model["A0"], dtype=float)
    else:
        a = np.diag(np.asarray(model["A0_diag"], dtype=float))
    if a.shape != (model["d"], model["d"]):
        raise ConfigError(
            f"A0 must be {model['d']} x {model['d']}, got {a.shape}", path="model.A0"
        )
    return a


def steps_from_sampling(sampling: dict) -> tuple[int, float]:
    """(n, delta_n) from the sampling block (T rounded to a whole step count)."""
    delta_n = sampling["delta_n"]
    n = int(round(sampling["T"] / delta_n))
    if n < 2:
        raise ConfigError("T / delta_n must give at least 2 steps", path="sampling.T")
    return n, delta_n
