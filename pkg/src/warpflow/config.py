"""Experiment configuration: JSON files validated against a per-module schema.

A config is a JSON object with the top-level keys ``name``, ``module``,
``seed``, ``description`` and the sections listed for its module. Unknown keys
anywhere are errors, reported with their dotted path.

Example::

    {
      "name": "beta-half-graph",
      "module": "csf",
      "warping": {"family": "power_beta", "beta": 0.5, "a": -1.0},
      "initial": {"kind": "sinusoid", "z0": -3.0, "amplitude": 0.2},
      "numerics": {"n_nodes": 128, "t_end": 1.0, "cadence": 0.05}
    }
"""

from __future__ import annotations

import copy
import hashlib
import inspect
import json
from dataclasses import dataclass
from pathlib import Path

from . import warp
from .errors import ConfigError

MODULES = ("geometry", "parallel", "csf", "mcf", "residual", "neckpinch")
TOP_LEVEL = {"name", "module", "seed", "description"}

_NUM = (int, float)
_INT = (int,)
_BOOL = (bool,)
_STR = (str,)
_LIST = (list,)
_OPT_NUM = (int, float, type(None))

SECTIONS = {
    "geometry": {
        "warping": "warping",
        "numerics": {
            "z_min": _NUM,
            "z_max": _NUM,
            "points": _INT,
            "sampling": _STR,
            "n": _INT,
            "fibre": _STR,
            "pairs": _INT,
        },
        "hypotheses": {"alpha": _NUM, "rho": _NUM},
    },
    "parallel": {
        "warping": "warping",
        "initial": {"z0": (int, float, list), "n": _INT},
        "numerics": {"t_end": _NUM, "tol": _NUM, "samples": _INT, "horizon": _NUM},
    },
    "csf": {
        "warping": "warping",
        "initial": {
            "kind": _STR,
            "z0": _NUM,
            "amplitude": _NUM,
            "frequency": _INT,
            "phase": _NUM,
            "modes": _INT,
            "seed": _INT,
        },
        "numerics": {
            "n_nodes": _INT,
            "mode": _STR,
            "t_end": _NUM,
            "cadence": _NUM,
            "cfl": _NUM,
            "dt": _OPT_NUM,
            "integrator": _STR,
            "rtol": _NUM,
            "atol": _NUM,
            "redistribute": _BOOL,
            "kappa_threshold": _NUM,
            "m_max": _INT,
            "stop_z_max_below": _OPT_NUM,
            "snapshot_times": _LIST,
            "compare_levels": _LIST,
        },
    },
    "mcf": {
        "warping": "warping",
        "model": {"kind": _STR, "n": _INT, "rho": _NUM},
        "initial": {"kind": _STR, "z0": _NUM, "amplitude": _NUM, "frequency": _INT},
        "numerics": {
            "n_nodes": _INT,
            "t_end": _NUM,
            "cadence": _NUM,
            "cfl": _NUM,
            "dt": _OPT_NUM,
            "kappa_threshold": _NUM,
            "check_hypotheses": _BOOL,
        },
        "hypotheses": {"alpha": _NUM},
    },
    "residual": {
        "warping": "warping",
        "model": {"kind": _STR, "n": _INT, "rho": _NUM},
        "initial": {"kind": _STR, "z0": _NUM, "amplitude": _NUM, "frequency": _INT, "phase": _NUM},
        "numerics": {
            "levels": _LIST,
            "t0": _NUM,
            "n_snapshots": _INT,
            "snap_steps": _INT,
            "mode": _STR,
            "redistribute": _BOOL,
            "dt_coef": _OPT_NUM,
        },
        "hypotheses": {"alpha": _NUM},
        "study": {"equations": _LIST},
    },
    "neckpinch": {
        "bump": {"n": _INT, "eps": _NUM, "r0": _NUM, "r1": _NUM},
        "numerics": {
            "n_nodes": _INT,
            "t_max": _NUM,
            "cadence": _NUM,
            "cfl": _NUM,
            "redistribute_every": _INT,
        },
    },
}

REQUIRED = {
    "geometry": ("warping",),
    "parallel": ("warping", "initial"),
    "csf": ("warping", "initial"),
    "mcf": ("warping", "model", "initial"),
    "residual": ("warping", "initial"),
    "neckpinch": ("bump",),
}


def _family_params(family: str):
    """(required, optional) constructor parameters of a warping family."""
    cls = warp._FAMILIES[family][0]
    sig = inspect.signature(cls.__init__).parameters
    req, opt = [], []
    for name in warp.FAMILY_PARAMS[family]:
        (req if sig[name].default is inspect.Parameter.empty else opt).append(name)
    return req, opt


def _check_type(path, value, types):
    # bool is an int subclass; refuse it where a number is expected
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(path, f"expected {_names(types)}, got a boolean")
    if not isinstance(value, types):
        raise ConfigError(path, f"expected {_names(types)}, got {type(value).__name__}")


def _names(types):
    return " or ".join(sorted({t.__name__ for t in types}))


def _validate_warping(d, path="warping"):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if "family" not in d:
        raise ConfigError(f"{path}.family", "missing")
    family = d["family"]
    if family not in warp.FAMILY_PARAMS:
        raise ConfigError(f"{path}.family", f"unknown family {family!r}; choose from {sorted(warp.FAMILY_PARAMS)}")
    req, opt = _family_params(family)
    for key in d:
        if key != "family" and key not in req and key not in opt:
            raise ConfigError(f"{path}.{key}", f"unknown parameter for {family}")
    for key in req:
        if key not in d:
            raise ConfigError(f"{path}.{key}", "missing")
    try:
        warp.from_dict(d)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from exc


def validate(cfg: dict) -> dict:
    """Check keys and types; returns the config unchanged."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "expected a JSON object")
    module = cfg.get("module")
    if module not in MODULES:
        raise ConfigError("module", f"expected one of {MODULES}, got {module!r}")
    if "name" not in cfg:
        raise ConfigError("name", "missing")
    _check_type("name", cfg["name"], _STR)
    if "seed" in cfg:
        _check_type("seed", cfg["seed"], _INT)
    sections = SECTIONS[module]
    for key in cfg:
        if key not in TOP_LEVEL and key not in sections:
            raise ConfigError(key, f"unknown key for module {module}")
    for key in REQUIRED[module]:
        if key not in cfg:
            raise ConfigError(key, "missing")
    for sec, schema in sections.items():
        if sec not in cfg:
            continue
        if schema == "warping":
            _validate_warping(cfg[sec], sec)
            continue
        body = cfg[sec]
        if not isinstance(body, dict):
            raise ConfigError(sec, "expected an object")
        for key, value in body.items():
            if key not in schema:
                raise ConfigError(f"{sec}.{key}", "unknown key")
            _check_type(f"{sec}.{key}", value, schema[key])
    return cfg


def canonical(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


def load(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"{path}: invalid JSON ({exc})") from exc
    return validate(data)


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(validate(copy.deepcopy(d)))

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def module(self) -> str:
        return self.raw["module"]

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def section(self, key: str) -> dict:
        return dict(self.raw.get(key, {}))

    def warping(self) -> warp.WarpingFunction:
        return warp.from_dict(self.raw["warping"])
