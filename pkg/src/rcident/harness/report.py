"""Run reports: canonical JSON and plot-data CSVs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"


def canonical(obj):
    """Plain JSON types; non-finite floats become strings, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": canonical(obj.real), "im": canonical(obj.imag)}
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2, ensure_ascii=True) + "\n"


@dataclass
class RunReport:
    pipeline: str
    config: dict
    status: str = "ok"
    failed_stage: str = None
    error: str = None
    stages: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "pipeline": self.pipeline,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "stages": list(self.stages),
            "results": self.results,
            "artifacts": sorted(self.artifacts),
            "config": self.config,
        }


def ensure_writable(out_dir) -> Path:
    """Create ``out_dir`` and probe it before any computation starts."""
    p = Path(out_dir)
    try:
        p.mkdir(parents=True, exist_ok=True)
        probe = p / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise OSError(f"output directory {p} is not writable: {e}") from e
    return p


def emit_report(report: RunReport, out_dir) -> Path:
    """Write ``report.json`` (deterministic) and ``timings.json`` (wall clock, not compared)."""
    p = ensure_writable(out_dir)
    (p / "report.json").write_text(dumps(report.to_dict()))
    (p / "timings.json").write_text(dumps(report.timings))
    return p / "report.json"
