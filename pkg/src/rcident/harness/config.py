"""Pipeline configuration: loading, defaults, overrides and validation."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from ..errors import ValidationError

PIPELINES = ("determinacy", "uniqueness", "linear_recover", "counterexample", "kotlarski",
             "panel", "binary_invert", "single_index", "riesz", "simulate")

DEFAULT_TOLERANCES = {
    "rank": 1e-10,
    "residual": 1e-8,
    "zero": 1e-6,
    "t0": 1e-4,
    "slope": 0.1,
    "moments": 1e-6,
    "cf": 1e-6,
    "l1": 1e-3,
    "tv": 1e-2,
}

_ROSTER = [
    {"name": "normal", "family": "normal", "density": {"family": "normal"}},
    {"name": "chi2_3", "family": "chi2", "params": {"k": 3}, "density": {"family": "chi2", "params": {"k": 3}}},
    {"name": "gamma_2", "family": "gamma", "params": {"shape": 2.0},
     "density": {"family": "gamma", "params": {"shape": 2.0}}},
    {"name": "lognormal", "family": "lognormal", "density": {"family": "lognormal"}},
    {"name": "abs_normal_3", "family": "abs_normal_power", "params": {"r": 3},
     "density": {"family": "abs_normal_power", "params": {"r": 3}}},
    {"name": "abs_normal_5", "family": "abs_normal_power", "params": {"r": 5},
     "density": {"family": "abs_normal_power", "params": {"r": 5}}},
]

_ATOMS4 = [[0.5, 1.0, -0.5], [-0.3, 0.2, 0.8], [1.1, -0.7, 0.1], [0.0, 0.4, -0.9]]
_PANEL_ATOMS = [[0.5, 1.0, -0.5], [-0.3, 0.2, 0.8], [1.1, -0.7, 0.1], [0.0, 0.4, -0.9]]

DEFAULT_INPUTS = {
    "determinacy": {"sequences": _ROSTER, "K": 40},
    "uniqueness": {"support": {"generator": "fan", "slopes": [1, 2, 3, 4, 5], "budget": 40},
                   "degree": 3, "homogeneous": False},
    "linear_recover": {"model": {"atoms": _ATOMS4, "weights": [0.1, 0.2, 0.3, 0.4]},
                       "support": {"generator": "fan", "slopes": [1, 2, 3, 4, 5], "budget": 40},
                       "K": 4, "reconstruct": True, "grid_extra": 20},
    "counterexample": {"Q": [[[2, 0], 1.0], [[0, 1], -1.0]], "p": 2, "n_x": 20, "K": 3,
                       "n_grid": 101, "method": "exact"},
    "kotlarski": {"delta": {"kind": "cauchy"}, "e1": {"kind": "uniform"}, "e2": {"kind": "triangular_cf"},
                  "t_max": 5.0, "step": 0.01, "mode": "population", "n": 10000},
    "panel": {"model": {"atoms": _PANEL_ATOMS, "weights": [0.1, 0.2, 0.3, 0.4],
                        "errors": [{"kind": "uniform"}, {"kind": "normal", "params": {"scale": 0.5}}],
                        "stayer": 0.7},
              "n_points": 20, "K": 3, "n_theta_checks": 100, "t_max": 5.0, "step": 0.01},
    "binary_invert": {"p": 1, "density": {"power": 4, "direction": [1.0, 0.6]}, "nodes": 4096,
                      "M": [8, 16, 32, 64], "epsilon": 0.2},
    "single_index": {"n_units": 10000, "links": ["identity", "exp"], "nodes": 64, "M": 4,
                     "density": {"power": 4, "direction": [1.0, 0.6]}},
    "riesz": {"r": 2.718281828459045, "T": 1.0, "n": 25, "independence_n": 4, "B": 6},
    "simulate": {"kind": "linear", "n": 100, "model": {"atoms": _ATOMS4, "weights": [0.1, 0.2, 0.3, 0.4]},
                 "support": {"generator": "grid", "axes": [[0.0, 1.0, 2.0], [0.0, 1.0]]}},
}


@dataclass(frozen=True)
class PipelineConfig:
    pipeline: str
    inputs: dict
    tolerances: dict
    seed: int
    threads: int
    out: str
    base_dir: str = "."

    def to_dict(self) -> dict:
        return {"pipeline": self.pipeline, "inputs": self.inputs, "tolerances": self.tolerances,
                "seed": self.seed, "threads": self.threads}


def load_config(path) -> dict:
    """Read a YAML or JSON config file into a dict."""
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file {p} does not exist")
    text = p.read_text()
    try:
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ValidationError(f"cannot parse config {p}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValidationError("config must be a mapping")
    return data


def _check_paths(obj, base: Path, where: str = "inputs") -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, str) and (k.endswith("_csv") or k in ("csv", "path")):
                if not (base / v).is_file():
                    raise ValidationError(f"{where}.{k}: file {v} does not exist")
            else:
                _check_paths(v, base, f"{where}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_paths(v, base, f"{where}[{i}]")


def resolve(pipeline: Optional[str], raw: Optional[dict] = None, seed: Optional[int] = None,
            out: Optional[str] = None, tolerances: Optional[dict] = None, threads: Optional[int] = None,
            base_dir: str = ".") -> PipelineConfig:
    """Merge defaults, file values and flag overrides (flags win) and validate."""
    raw = dict(raw or {})
    unknown = set(raw) - {"pipeline", "inputs", "tolerances", "seed", "threads", "out"}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    name = raw.get("pipeline", pipeline)
    if pipeline is not None and name != pipeline:
        raise ValidationError(f"config declares pipeline {name!r} but {pipeline!r} was requested")
    if name not in PIPELINES:
        raise ValidationError(f"unknown pipeline {name!r}")
    inputs = dict(DEFAULT_INPUTS[name])
    given = raw.get("inputs") or {}
    if not isinstance(given, dict):
        raise ValidationError("inputs must be a mapping")
    bad = set(given) - set(DEFAULT_INPUTS[name]) - _OPTIONAL_INPUTS.get(name, set())
    if bad:
        raise ValidationError(f"unknown inputs for {name}: {sorted(bad)}")
    inputs.update(given)
    tol = dict(DEFAULT_TOLERANCES)
    for src in (raw.get("tolerances") or {}, tolerances or {}):
        for k, v in src.items():
            if k not in DEFAULT_TOLERANCES:
                raise ValidationError(f"unknown tolerance {k!r}")
            try:
                v = float(v)
            except (TypeError, ValueError):
                raise ValidationError(f"tolerance {k} must be a number") from None
            if not v > 0:
                raise ValidationError(f"tolerance {k} must be positive")
            tol[k] = v
    s = seed if seed is not None else raw.get("seed", 0)
    if not isinstance(s, int) or isinstance(s, bool) or s < 0:
        raise ValidationError("seed must be a nonnegative integer")
    th = threads if threads is not None else raw.get("threads", int(os.environ.get("RCIDENT_THREADS", "1")))
    if not isinstance(th, int) or th < 1:
        raise ValidationError("threads must be a positive integer")
    o = out if out is not None else raw.get("out", "rcident-out")
    _check_paths(inputs, Path(base_dir))
    return PipelineConfig(name, inputs, tol, int(s), int(th), str(o), str(base_dir))


_OPTIONAL_INPUTS = {
    "linear_recover": {"support_csv", "atoms_csv", "grid"},
    "simulate": {"support_csv", "atoms_csv", "p", "density", "n_points"},
    "kotlarski": {"y1_csv", "y2_csv", "diff_csv"},
    "uniqueness": {"support_csv"},
    "determinacy": set(),
}
