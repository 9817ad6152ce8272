"""Batch evaluation of 0-, 1- and 2-axis parameter scans.

Every grid point runs mean field -> input-output matrix -> output
statistics independently; results are written in row-major order as
``<stem>.csv`` with a gnuplot script ``<stem>.gp`` and a resolved
configuration echo ``<stem>.meta.txt``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import config as cfg
from .config import ScanSpec
from .fluctuation import (
    FluctuationError,
    GridTooCoarseError,
    SingularBackwardBlockError,
    input_output_matrix,
    verify_signature,
)
from .mean_field import BVPError, solve_bvp
from .model import ConfigurationError, validate
from .quantum_stats import evaluate, output_coefficients

WORKERS_ENV = "PBGSQUEEZE_WORKERS"

# per-point status codes
OK = 0
CONFIG_ERROR = 1
BVP_FAILED = 2
GRID_TOO_COARSE = 3
SINGULAR_BLOCK = 4
NUMERICAL_ERROR = 5

STATUS_NAMES = {
    OK: "ok",
    CONFIG_ERROR: "configuration_error",
    BVP_FAILED: "bvp_not_converged",
    GRID_TOO_COARSE: "grid_too_coarse",
    SINGULAR_BLOCK: "singular_backward_block",
    NUMERICAL_ERROR: "numerical_error",
}

DIAGNOSTICS = ("status", "newton_iterations", "bvp_residual", "flux_drift", "signature_deviation")
UNDEFINED = "undefined"


class ScanError(RuntimeError):
    pass


class OutputDirectoryError(ScanError):
    pass


class AllPointsFailedError(ScanError):
    pass


@dataclass(frozen=True)
class PointRecord:
    coords: tuple[float, ...]
    status: int
    iterations: int | None = None
    residual: float | None = None
    flux_drift: float | None = None
    signature_dev: float | None = None
    # None = undefined observable; absent entirely when status != OK
    values: tuple[float | None, ...] = ()
    message: str = ""


@dataclass(frozen=True)
class ScanResult:
    spec: ScanSpec
    records: tuple[PointRecord, ...]
    stage: str = "full"

    @property
    def columns(self) -> list[str]:
        obs = list(self.spec.observables) if self.stage == "full" else []
        return [a.label for a in self.spec.axes] + list(DIAGNOSTICS) + obs + ["message"]

    @property
    def status(self) -> np.ndarray:
        return np.array([r.status for r in self.records])

    def column(self, name: str) -> np.ndarray:
        """Float array of one observable or diagnostic; NaN where missing or undefined."""
        attr = {
            "status": "status",
            "newton_iterations": "iterations",
            "bvp_residual": "residual",
            "flux_drift": "flux_drift",
            "signature_deviation": "signature_dev",
        }
        labels = [a.label for a in self.spec.axes]
        out = np.full(len(self.records), np.nan)
        for n, rec in enumerate(self.records):
            if name in labels:
                v = rec.coords[labels.index(name)]
            elif name in attr:
                v = getattr(rec, attr[name])
            else:
                if name not in self.spec.observables:
                    raise KeyError(name)
                v = rec.values[self.spec.observables.index(name)] if rec.values else None
            out[n] = np.nan if v is None else v
        return out

    def grid(self, name: str) -> np.ndarray:
        """``column(name)`` reshaped to the axis counts."""
        return self.column(name).reshape([a.count for a in self.spec.axes] or [1])


def evaluate_point(spec: ScanSpec, coords, stage: str = "full") -> PointRecord:
    """Run the full pipeline at one grid point, catching per-point failures."""
    coords = tuple(float(c) for c in coords)
    try:
        params, bc, state = cfg.apply_values(spec, cfg.point_assignments(spec, coords))
        validate(params, bc, state)
    except ConfigurationError as exc:
        return PointRecord(coords, CONFIG_ERROR, message=str(exc))
    try:
        mf = solve_bvp(params, bc, options=spec.options)
    except BVPError as exc:
        return PointRecord(coords, BVP_FAILED, residual=_finite(exc.residual), message=str(exc))
    base = dict(iterations=mf.iterations, residual=mf.residual, flux_drift=mf.flux_drift)
    if stage == "mean_field":
        return PointRecord(coords, OK, **base)
    try:
        u = input_output_matrix(params, mf)
    except GridTooCoarseError as exc:
        return PointRecord(coords, GRID_TOO_COARSE, **base, message=str(exc))
    except SingularBackwardBlockError as exc:
        return PointRecord(coords, SINGULAR_BLOCK, **base, message=str(exc))
    except (FluctuationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return PointRecord(coords, NUMERICAL_ERROR, **base, message=str(exc))
    stats = output_coefficients(u, state, mf.outputs())
    values = tuple(evaluate(stats, name) for name in spec.observables)
    return PointRecord(coords, OK, **base, signature_dev=verify_signature(u), values=values)


def _finite(x):
    return float(x) if x is not None and np.isfinite(x) else None


def _task(args):
    spec, coords, stage = args
    return evaluate_point(spec, coords, stage)


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError as exc:
                raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigurationError("worker count must be >= 1")
    return workers


def run_scan(
    spec: ScanSpec,
    workers: int | None = None,
    write: bool = True,
    stage: str = "full",
) -> ScanResult:
    """Evaluate every grid point of ``spec`` in row-major order.

    ``stage="mean_field"`` stops after the boundary-value problem (flux
    diagnostics only). With ``write`` the CSV, gnuplot script and metadata
    are written to ``spec.output_dir``; the directory is checked before any
    computation starts.

    Raises
    ------
    OutputDirectoryError
        If the output directory cannot be created or written.
    AllPointsFailedError
        If no grid point succeeded (files are still written).
    """
    if stage not in ("full", "mean_field"):
        raise ValueError(f"unknown stage {stage!r}")
    if write:
        _check_output_dir(spec.output_dir)
    points = cfg.grid_points(spec)
    n_workers = min(worker_count(workers), len(points))
    tasks = [(spec, p, stage) for p in points]
    if n_workers == 1:
        records = [_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * n_workers))
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_task, tasks, chunksize=chunk))
    result = ScanResult(spec, tuple(records), stage)
    if write:
        write_outputs(result)
    if not any(r.status == OK for r in records):
        raise AllPointsFailedError(f"all {len(records)} scan points failed (first: {records[0].message})")
    return result


def _check_output_dir(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputDirectoryError(f"cannot create output directory {path!r}: {exc}") from exc
    if not os.access(path, os.W_OK | os.X_OK):
        raise OutputDirectoryError(f"output directory {path!r} is not writable")


def _cell(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def csv_text(result: ScanResult, timestamp: str | None = None) -> str:
    """CSV body; the first line is a ``#`` comment carrying the timestamp."""
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    buf = io.StringIO()
    buf.write(f"# pbgsqueeze scan {result.spec.stem} generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    n_obs = len(result.spec.observables) if result.stage == "full" else 0
    for r in result.records:
        row = [repr(c) for c in r.coords]
        row += [str(r.status), "" if r.iterations is None else str(r.iterations)]
        row += [_cell(r.residual), _cell(r.flux_drift), _cell(r.signature_dev)]
        if r.status == OK and r.values:
            row += [UNDEFINED if v is None else repr(float(v)) for v in r.values]
        else:
            row += [""] * n_obs
        row.append(r.message)
        writer.writerow(row)
    return buf.getvalue()


def gnuplot_script(result: ScanResult) -> str:
    spec = result.spec
    cols = result.columns
    csv_name = f"{spec.stem}.csv"
    lines = [
        f"# gnuplot script for {csv_name}",
        'set datafile separator ","',
        'set datafile missing ""',
        f'set title "{spec.title or spec.stem}"',
    ]
    obs = [n for n in cols if n in spec.observables] or ["flux_drift"]
    if len(spec.axes) == 0:
        lines.append(f'plot "{csv_name}" using 0:{cols.index(obs[0]) + 1} with points title "{obs[0]}"')
    elif len(spec.axes) == 1:
        lines += [f'set xlabel "{spec.axes[0].label}"', f'set ylabel "{spec.zlabel or obs[0]}"']
        plots = [f'"{csv_name}" using 1:{cols.index(o) + 1} with lines title "{o}"' for o in obs]
        lines.append("plot " + ", \\\n     ".join(plots))
    else:
        lines += [
            f'set xlabel "{spec.axes[0].label}"',
            f'set ylabel "{spec.axes[1].label}"',
            f'set cblabel "{spec.zlabel or obs[0]}"',
            "set view map",
            "set palette rainbow",
        ]
        for n, o in enumerate(obs):
            if n:
                lines.append("pause -1")
            lines.append(
                f'splot "{csv_name}" using 1:2:{cols.index(o) + 1} with points pointtype 5 pointsize 0.6 palette title "{o}"'
            )
    return "\n".join(lines) + "\n"


def meta_text(result: ScanResult, timestamp: str | None = None) -> str:
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    counts = {}
    for r in result.records:
        counts[STATUS_NAMES[r.status]] = counts.get(STATUS_NAMES[r.status], 0) + 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    head = [
        f"# pbgsqueeze scan {result.spec.stem}",
        f"# generated {stamp}",
        f"# stage {result.stage}; points {len(result.records)}; {summary}",
        "# resolved configuration follows",
        "",
    ]
    return "\n".join(head) + cfg.dumps(result.spec)


def write_outputs(result: ScanResult) -> dict[str, str]:
    spec = result.spec
    base = os.path.join(spec.output_dir, spec.stem)
    paths = {"csv": base + ".csv", "gp": base + ".gp", "meta": base + ".meta.txt"}
    try:
        with open(paths["csv"], "w") as fh:
            fh.write(csv_text(result))
        with open(paths["gp"], "w") as fh:
            fh.write(gnuplot_script(result))
        with open(paths["meta"], "w") as fh:
            fh.write(meta_text(result))
    except OSError as exc:
        raise OutputDirectoryError(f"cannot write scan outputs to {spec.output_dir!r}: {exc}") from exc
    return paths


def strip_timestamp(text: str) -> str:
    """CSV text without its leading timestamp comment."""
    return text.split("\n", 1)[1] if text.startswith("#") else text
