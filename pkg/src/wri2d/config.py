"""Run configuration: JSON schema, strict validation, default materialization.

A config fully determines an inversion run; the resolved form (all
defaults filled in) is echoed into the run manifest so a run can be
reproduced bit for bit from its manifest alone.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ValidationError

_PENALTY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lambda_frac": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "gamma_init": {"type": "number", "minimum": 0},
        "gamma0_init": {"type": ["number", "null"], "minimum": 0},
        "gamma_floor": {"type": "number", "minimum": 0},
        "gamma_decay_every": {"type": "integer", "minimum": 1},
        "gamma_decay_factor": {"type": "number", "minimum": 1},
        "damping_frac": {"type": "number", "minimum": 0},
        "gamma_policy": {"enum": ["zeta", "grad_frac"]},
        "grad_frac": {"type": "number", "minimum": 0},
        "bounds_start_iter": {"type": "integer", "minimum": 0},
        "xi_power_iters": {"type": "integer", "minimum": 1},
    },
}

_SCHEDULE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["batched", "simultaneous"]},
        "frequencies": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "f_start": {"type": "number"},
        "f_end": {"type": "number"},
        "df": {"type": "number", "exclusiveMinimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "overlap": {"type": "integer", "minimum": 0},
        "k_max": {"type": "integer", "minimum": 1},
        "eps_b": {"type": "number", "minimum": 0},
        "eps_d": {"type": "number", "minimum": 0},
        "eps_d_from_noise": {"type": "boolean"},
        "paths": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"type": "number"}, {"type": "integer"}],
                "items": False,
                "minItems": 2,
                "maxItems": 2,
            },
        },
    },
    "required": ["kind"],
}

_PML_SCHEMA = {
    "type": ["object", "null"],
    "additionalProperties": False,
    "properties": {
        "n_pml": {"type": "integer", "minimum": 0},
        "sigma_max": {"type": ["number", "null"], "minimum": 0},
        "exponent": {"type": "number", "minimum": 1},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "initial_model": {"type": "string"},
        "data_dir": {"type": "string"},
        "output_dir": {"type": "string"},
        "mode": {"enum": ["wri", "irwri"]},
        "bounds_on": {"type": "boolean"},
        "tv_on": {"type": "boolean"},
        "bounds": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "v_min": {"type": "number", "exclusiveMinimum": 0},
                "v_max": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["v_min", "v_max"],
        },
        "true_model": {"type": ["string", "null"]},
        "penalty": _PENALTY_SCHEMA,
        "schedule": _SCHEDULE_SCHEMA,
        "pml": _PML_SCHEMA,
        "seed": {"type": "integer"},
        "threads": {"type": "integer", "minimum": 1},
        "solver_backend": {"enum": ["direct", "cg"]},
    },
    "required": ["initial_model", "data_dir", "output_dir", "mode", "schedule"],
}

_DEFAULTS = {
    "bounds_on": False,
    "tv_on": False,
    "bounds": None,
    "true_model": None,
    "penalty": {
        "lambda_frac": 1e-5,
        "alpha": 0.5,
        "gamma_init": 0.01,
        "gamma0_init": None,
        "gamma_floor": 0.01,
        "gamma_decay_every": 10,
        "gamma_decay_factor": 1.0,
        "damping_frac": 0.0,
        "gamma_policy": "zeta",
        "grad_frac": 0.02,
        "bounds_start_iter": 0,
        "xi_power_iters": 30,
    },
    "schedule": {
        "k_max": 15,
        "eps_b": 0.0,
        "eps_d": 0.0,
        "eps_d_from_noise": False,
        "paths": [],
        "overlap": 0,
    },
    "pml": None,
    "seed": 0,
    "threads": 1,
    "solver_backend": "direct",
}


def resolve_config(raw: dict) -> dict:
    """Validate a raw config dict and materialize every default."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"config invalid: {exc.message}") from exc
    cfg = copy.deepcopy(raw)
    for key, default in _DEFAULTS.items():
        if key not in cfg:
            cfg[key] = copy.deepcopy(default)
        elif isinstance(default, dict) and isinstance(cfg[key], dict):
            merged = copy.deepcopy(default)
            merged.update(cfg[key])
            cfg[key] = merged
    sched = cfg["schedule"]
    if sched["kind"] == "batched":
        for need in ("f_start", "f_end", "df", "batch_size"):
            if need not in sched:
                raise ValidationError(f"batched schedule needs {need!r}")
    else:
        if "frequencies" not in sched:
            raise ValidationError("simultaneous schedule needs 'frequencies'")
    if cfg["bounds_on"] and cfg["bounds"] is None and cfg["true_model"] is None:
        raise ValidationError(
            "bounds_on requires explicit bounds or a true model to derive them from"
        )
    return cfg


def load_config(path) -> dict:
    """Load a config file; run manifests are accepted and unwrapped."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and "config" in doc and "package" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return resolve_config(doc)
