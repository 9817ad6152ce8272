"""Command line interface.

    pbgsqueeze run CONFIG [--out DIR] [--workers N]
    pbgsqueeze figure ID [--out DIR] [--points N] [--workers N] [--config-only]
    pbgsqueeze validate CONFIG

Failures print one line ``error: <kind>: <message>`` to stderr and exit
with a non-zero code.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import config as cfg
from .model import ConfigurationError, validate
from .recipes import DEFAULT_1D, DEFAULT_2D, emit_figure_recipe
from .scan_engine import OK, AllPointsFailedError, OutputDirectoryError, ScanError, run_scan

EXIT_CONFIG = 2
EXIT_OUTPUT = 3
EXIT_FAILED = 4
EXIT_INTERNAL = 5


def _fail(kind: str, message: str, code: int) -> int:
    flat = " ".join(str(message).split())
    print(f"error: {kind}: {flat}", file=sys.stderr)
    return code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbgsqueeze", description="Scans of squeezing and photon statistics in a chi(2) band-gap waveguide.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the scan described by a TOML config")
    run.add_argument("config")
    run.add_argument("--out", help="override scan.output_dir")
    run.add_argument("--workers", type=int, help="worker processes (default: $PBGSQUEEZE_WORKERS or CPU count)")

    fig = sub.add_parser("figure", help="run a prebuilt figure recipe (2..12)")
    fig.add_argument("id", type=int)
    fig.add_argument("--out", default=".", help="output directory")
    fig.add_argument("--points", type=int, help=f"points per axis (default {DEFAULT_1D} for 1-D, {DEFAULT_2D} for 2-D)")
    fig.add_argument("--workers", type=int)
    fig.add_argument("--config-only", action="store_true", help="write <stem>.toml and stop")

    val = sub.add_parser("validate", help="check a TOML config without running it")
    val.add_argument("config")
    return p


def _validate_spec(spec: cfg.ScanSpec) -> None:
    validate(spec.params, spec.bc, spec.state)
    # grid corners catch out-of-domain axis ranges
    for coords in ([a.start for a in spec.axes], [a.stop for a in spec.axes]):
        validate(*cfg.apply_values(spec, cfg.point_assignments(spec, coords)))


def _summary(result) -> str:
    n_ok = sum(r.status == OK for r in result.records)
    return f"{result.spec.stem}: {n_ok}/{len(result.records)} points ok -> {os.path.join(result.spec.output_dir, result.spec.stem)}.csv"


def _run(spec, workers) -> int:
    try:
        result = run_scan(spec, workers=workers)
    except OutputDirectoryError as exc:
        return _fail("output", exc, EXIT_OUTPUT)
    except AllPointsFailedError as exc:
        return _fail("scan_failed", exc, EXIT_FAILED)
    except ScanError as exc:
        return _fail("scan", exc, EXIT_FAILED)
    print(_summary(result))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            spec = cfg.load(args.config)
            _validate_spec(spec)
            n = 1
            for a in spec.axes:
                n *= a.count
            print(f"ok: {spec.stem}: {len(spec.axes)} axes, {n} points, {len(spec.observables)} observables")
            return 0
        if args.command == "run":
            spec = cfg.load(args.config)
            if args.out:
                spec = replace(spec, output_dir=args.out)
            _validate_spec(spec)
            return _run(spec, args.workers)
        # figure
        n1 = n2 = args.points
        spec = emit_figure_recipe(args.id, n1 or DEFAULT_1D, n2 or DEFAULT_2D, output_dir=args.out)
        if args.config_only:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, spec.stem + ".toml")
            cfg.dump(spec, path)
            print(path)
            return 0
        return _run(spec, args.workers)
    except FileNotFoundError as exc:
        return _fail("io", exc, EXIT_CONFIG)
    except ConfigurationError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except OSError as exc:
        return _fail("output", exc, EXIT_OUTPUT)
    except Exception as exc:  # pragma: no cover - last-resort reporting
        return _fail("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
