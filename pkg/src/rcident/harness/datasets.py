"""Typed CSV datasets for the harness."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, ValidationError

log = logging.getLogger("rcident.harness")

SCHEMAS = ("linear", "panel", "binary", "cf_grid", "moments")


@dataclass(frozen=True)
class Dataset:
    schema: str
    columns: dict
    n_rows: int
    warnings: tuple = ()

    def stats(self) -> dict:
        out = {}
        for k, v in sorted(self.columns.items()):
            if v.size:
                out[k] = {"mean": float(np.mean(v)), "min": float(np.min(v)), "max": float(np.max(v))}
        return out


def _expected(schema: str, header: list) -> list:
    if schema == "linear":
        xs = [h for h in header if h != "y"]
        if "y" not in header or not xs or xs != [f"x{i + 1}" for i in range(len(xs))]:
            raise ValidationError("linear schema expects columns x1..xp, y")
        return header
    if schema == "binary":
        xs = [h for h in header if h != "y"]
        if header[:1] != ["y"] or xs != [f"x{i + 1}" for i in range(len(xs))]:
            raise ValidationError("binary schema expects columns y, x1..xp")
        return header
    fixed = {"panel": ["unit", "period", "y", "x"], "cf_grid": ["t", "re", "im"],
             "moments": ["order", "value", "absolute_value"]}[schema]
    if header != fixed:
        raise ValidationError(f"{schema} schema expects columns {','.join(fixed)}")
    return header


def load_dataset(path, schema: str) -> Dataset:
    """Read a CSV with a known schema; malformed rows raise with their line number."""
    if schema not in SCHEMAS:
        raise ValidationError(f"unknown schema {schema!r}")
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"dataset {p} does not exist")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"dataset {p} has no header") from None
        _expected(schema, header)
        rows = []
        for line, r in enumerate(reader, start=2):
            if not r:
                continue
            if len(r) != len(header):
                raise DataError(f"{p}: line {line} has {len(r)} fields, expected {len(header)}")
            try:
                rows.append([float(v) for v in r])
            except ValueError:
                raise DataError(f"{p}: line {line} is not numeric") from None
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    warns = []
    if not rows:
        warns.append(f"{p} has a header but no rows")
        log.warning(warns[-1])
    if schema == "panel" and rows:
        units = {}
        T = int(arr[:, 1].max())
        for u, t in arr[:, :2].astype(int):
            units.setdefault(u, set()).add(t)
        for u, ts in sorted(units.items()):
            missing = set(range(1, T + 1)) - ts
            if missing:
                raise ValidationError(f"unit {u} is missing period(s) {sorted(missing)}")
    cols = {h: arr[:, i] for i, h in enumerate(header)}
    ds = Dataset(schema, cols, len(rows), tuple(warns))
    log.info("loaded %s rows from %s", ds.n_rows, p)
    return ds


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
