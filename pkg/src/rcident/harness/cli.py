"""``rcident`` command line.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

SUBCOMMANDS = {
    "determinacy": "determinacy",
    "uniqueness": "uniqueness",
    "recover-linear": "linear_recover",
    "counterexample": "counterexample",
    "kotlarski": "kotlarski",
    "panel": "panel",
    "binary-invert": "binary_invert",
    "single-index": "single_index",
    "riesz": "riesz",
    "simulate": "simulate",
}

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcident", description="Identification checks for random coefficient models.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {SUBCOMMANDS[name]} pipeline")
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (default rcident-out)")
        p.add_argument("--threads", type=int, help="BLAS/OpenMP threads (default $RCIDENT_THREADS or 1)")
    return ap


def _tolerance_overrides(extra: list) -> dict:
    """Parse trailing ``--tol-NAME VALUE`` (or ``--tol-NAME=VALUE``) pairs."""
    out, i = {}, 0
    while i < len(extra):
        a = extra[i]
        if not a.startswith("--tol-"):
            raise SystemExit(f"unrecognized argument {a!r}")
        if "=" in a:
            key, val = a[6:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise SystemExit(f"{a} needs a value")
            key, val = a[6:], extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = val
    return out


def _set_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    args, extra = _parser().parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads if args.threads is not None else int(os.environ.get("RCIDENT_THREADS", "1"))
    if threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INVALID
    _set_threads(threads)

    # numeric modules are imported after the thread variables are set
    import numpy as np

    from ..errors import NumericalFailure, ValidationError
    from .config import load_config, resolve
    from .pipelines import run_pipeline
    from .report import emit_report, ensure_writable

    pipeline = SUBCOMMANDS[args.command]
    try:
        tols = _tolerance_overrides(extra)
        raw, base = {}, Path(".")
        if args.config:
            raw = load_config(args.config)
            base = Path(args.config).resolve().parent
        cfg = resolve(pipeline, raw, seed=args.seed, out=args.out, tolerances=tols, threads=threads,
                      base_dir=str(base))
        out = ensure_writable(cfg.out)
    except (ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    report = run_pipeline(cfg, out)
    path = emit_report(report, out)
    exc = report.__dict__.get("exception")
    if exc is None:
        print(f"{cfg.pipeline}: ok ({path})")
        return EXIT_OK
    print(f"error in stage {report.failed_stage}: {report.error}", file=sys.stderr)
    if isinstance(exc, ValidationError):
        return EXIT_INVALID
    if isinstance(exc, (NumericalFailure, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERICAL
    raise exc


if __name__ == "__main__":
    sys.exit(main())
