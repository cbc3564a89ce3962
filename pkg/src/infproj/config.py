"""Run configuration: JSON schema, grid notation and solver-parameter expansion."""
from __future__ import annotations

import copy
import itertools
import json
import re

import jsonschema

from .errors import ConfigError

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_GRIDABLE_NUM = {"oneOf": [_NUM, {"type": "string"}, {"type": "array", "items": _NUM, "minItems": 1}]}

SOLVERS = ("st_spg", "mspg", "bmd", "sgd_erm")

PARAMS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        # st_spg
        "K": _INT1, "gamma": _GRIDABLE_NUM, "mu": _GRIDABLE_NUM, "alpha_samp": _GRIDABLE_NUM,
        "schedule": {"oneOf": [{"const": "growing"}, _INT1]},
        "mode_x": {"enum": ["smooth", "nonsmooth"]}, "mode_y": {"enum": ["smooth", "nonsmooth"]},
        "full_batch": {"type": "boolean"},
        # mspg
        "T": _INT1, "c": _GRIDABLE_NUM, "b": _INT1, "batch_cap": _INT1, "L_override": _POS,
        "D_y": _POS, "loss_bound": _POS,
        # bmd / sgd
        "eta": _GRIDABLE_NUM, "eta_theta": _GRIDABLE_NUM, "eta_p": _GRIDABLE_NUM, "rho": _GRIDABLE_NUM,
        "full_dual": {"type": "boolean"},
        # shared
        "batch_size": _INT1,
    },
}

DATA_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "path": {"type": "string"},
        "test_path": {"type": "string"},
        "dim": _INT1,
        "synthetic": {"enum": ["a9a_like", "logistic"]},
        "n": _INT1,
        "d": _INT1,
        "seed": {"type": "integer"},
        "subsample": {"oneOf": [_INT1, {"type": "number", "exclusiveMinimum": 0, "maximum": 1}]},
    },
    "oneOf": [{"required": ["path"]}, {"required": ["synthetic"]}],
}

PROBLEM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lambda": {"type": "number", "minimum": 0},
        "loss": {"enum": ["logistic", "truncated"]},
        "alpha_trunc": _POS,
    },
}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data", "solver"],
    "properties": {
        "data": DATA_SCHEMA,
        "split": {
            "type": "object", "additionalProperties": False,
            "properties": {"train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                           "seed": {"type": "integer"}},
        },
        "problem": PROBLEM_SCHEMA,
        "solver": {"enum": list(SOLVERS)},
        "params": PARAMS_SCHEMA,
        "seed": {"type": "integer"},
        "log_every": _INT1,
        "dense_trace": {"type": "boolean"},
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

BENCH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data", "solvers"],
    "properties": {
        "data": DATA_SCHEMA,
        "split": RUN_SCHEMA["properties"]["split"],
        "problem": PROBLEM_SCHEMA,
        "solvers": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False, "required": ["solver"],
                "properties": {"label": {"type": "string"}, "solver": {"enum": list(SOLVERS)},
                               "params": PARAMS_SCHEMA, "problem": PROBLEM_SCHEMA},
            },
        },
        "seed": {"type": "integer"},
        "log_every": _INT1,
        "log_x": {"type": "boolean"},
        "parallel": {"type": "boolean"},
        "output": RUN_SCHEMA["properties"]["output"],
    },
}

_GRID_RE = re.compile(
    r"^\{?\s*(?P<n>n\s*\*\s*)?(?P<base>\d+(?:\.\d+)?)\s*\^\s*(?:\{(?P<a>-?\d+)\s*:\s*(?P<b>-?\d+)\}|(?P<e>-?\d+))\s*\}?$")


def parse_grid(text: str, n: int | None = None) -> list[float]:
    """Expand grid notation: ``10^{-5:2}`` -> [1e-5, ..., 1e2], ``n*10^{-3:3}``, ``n*10^-2``."""
    m = _GRID_RE.match(text.strip())
    if m is None:
        raise ConfigError(f"unrecognized grid notation {text!r}")
    base = float(m["base"])
    if m["e"] is not None:
        exps = [int(m["e"])]
    else:
        a, b = int(m["a"]), int(m["b"])
        if b < a:
            raise ConfigError(f"empty grid range in {text!r}")
        exps = list(range(a, b + 1))
    scale = 1.0
    if m["n"]:
        if n is None:
            raise ConfigError(f"{text!r} refers to n but the sample count is unknown")
        scale = float(n)
    return [scale * base ** e for e in exps]


def validate(doc: dict, schema: dict) -> dict:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    return doc


def load_config(path, schema: dict) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return validate(doc, schema)


def expand_params(params: dict, n: int | None = None) -> list[dict]:
    """Cartesian product over grid strings and list values; scalars pass through."""
    keys, choices = [], []
    for k, v in params.items():
        if isinstance(v, str) and k not in ("schedule", "mode_x", "mode_y"):
            v = parse_grid(v, n)
        if isinstance(v, list):
            keys.append(k)
            choices.append(v)
    out = []
    for combo in itertools.product(*choices):
        p = copy.deepcopy(params)
        p.update(zip(keys, combo))
        out.append(p)
    return out
