"""Run configuration: TOML text with [device], [boundary], [input_state], [solver] and [scan] tables.

Complex numbers are written as strings such as ``"0.1+2.5i"``; plain
numbers are accepted too. Example::

    [device]
    length = 2.0
    k_f = "0.05+0i"
    k_b = 0.05

    [boundary]
    a_pf0 = 10.0

    [input_state]
    xi = ["-10", "10", 0, 0, 0, 0]

    [scan]
    stem = "fig07"
    observables = ["fano:s_F+i_F"]

    [[scan.axes]]
    label = "K_p"
    targets = ["device.k_p"]
    start = 0.0
    stop = 3.0
    count = 101

An axis target may carry a factor, ``"input_state.xi.s_F*-1"``, so that one
coordinate drives several linked fields.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np
import tomli_w

from .mean_field import BVPOptions
from .model import MODES, BoundaryConditions, ConfigurationError, InputState, WaveguideParams, mode_index
from .quantum_stats import observable_names

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_COMPLEX_RE = re.compile(
    r"^\s*(?P<re>[-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|inf|nan))?"
    r"\s*(?:(?P<sign>[-+])\s*(?P<im>(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|inf|nan))?\s*[ij])?\s*$"
)

COMPLEX_FIELDS = {"k_s", "k_i", "k_p", "k_f", "k_b"}


def parse_complex(value) -> complex:
    """Parse ``"re+imi"`` strings (or numbers) into complex."""
    if isinstance(value, bool):
        raise ConfigurationError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if not isinstance(value, str):
        raise ConfigurationError(f"expected a number, got {value!r}")
    text = value.strip().replace(" ", "")
    m = _COMPLEX_RE.match(text)
    if not m or (m.group("re") is None and m.group("sign") is None):
        # bare imaginary such as "2i" or "-i"
        m2 = re.match(r"^([-+]?)(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+)?[ij]$", text)
        if not m2:
            raise ConfigurationError(f"cannot parse complex value {value!r}")
        mag = float(m2.group(2)) if m2.group(2) else 1.0
        return complex(0.0, -mag if m2.group(1) == "-" else mag)
    re_part = float(m.group("re")) if m.group("re") is not None else 0.0
    im_part = 0.0
    if m.group("sign") is not None:
        mag = float(m.group("im")) if m.group("im") is not None else 1.0
        im_part = -mag if m.group("sign") == "-" else mag
    return complex(re_part, im_part)


def format_complex(value) -> str:
    value = complex(value)
    sign = "-" if math.copysign(1.0, value.imag) < 0 else "+"
    return f"{value.real!r}{sign}{abs(value.imag)!r}i"


@dataclass(frozen=True)
class Axis:
    label: str
    targets: tuple[tuple[str, float], ...]
    start: float
    stop: float
    count: int = 101

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.start)])
        return np.linspace(float(self.start), float(self.stop), int(self.count))


@dataclass(frozen=True)
class ScanSpec:
    params: WaveguideParams
    bc: BoundaryConditions
    state: InputState
    axes: tuple[Axis, ...] = ()
    observables: tuple[str, ...] = ()
    output_dir: str = "."
    stem: str = "scan"
    options: BVPOptions = field(default_factory=BVPOptions)
    title: str = ""
    zlabel: str = ""

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "observables", tuple(self.observables or observable_names()))


# --------------------------------------------------------------------------
# field paths
# --------------------------------------------------------------------------


def _parse_target(text: str) -> tuple[str, float]:
    path, _, factor = text.partition("*")
    return path.strip(), float(factor) if factor else 1.0


def _format_target(path: str, factor: float) -> str:
    return path if factor == 1.0 else f"{path}*{factor!r}"


def check_path(path: str) -> None:
    parts = path.split(".")
    if parts[0] == "device" and len(parts) == 2 and parts[1] in {f.name for f in fields(WaveguideParams)}:
        return
    if parts[0] == "boundary" and len(parts) == 2 and parts[1] in {f.name for f in fields(BoundaryConditions)}:
        return
    if parts[0] == "input_state" and len(parts) == 3 and parts[1] in {f.name for f in fields(InputState)}:
        mode_index(parts[2])
        return
    raise ConfigurationError(f"axis target {path!r} does not name a configuration field")


def apply_values(spec: ScanSpec, assignments) -> tuple[WaveguideParams, BoundaryConditions, InputState]:
    """Apply ``[(path, value), ...]`` to the base configuration."""
    params, bc, state = spec.params, spec.bc, spec.state
    for path, value in assignments:
        section, name, *rest = path.split(".")
        if section == "device":
            params = replace(params, **{name: value})
        elif section == "boundary":
            bc = replace(bc, **{name: value})
        else:
            state = state.replace_mode(name, rest[0], value)
    return params, bc, state


def point_assignments(spec: ScanSpec, coords) -> list[tuple[str, float]]:
    out = []
    for axis, x in zip(spec.axes, coords):
        for path, factor in axis.targets:
            out.append((path, factor * float(x)))
    return out


def grid_points(spec: ScanSpec) -> list[tuple[float, ...]]:
    """Row-major list of axis coordinates (last axis fastest)."""
    if not spec.axes:
        return [()]
    mesh = np.meshgrid(*[a.values() for a in spec.axes], indexing="ij")
    return [tuple(float(v) for v in row) for row in np.stack([m.ravel() for m in mesh], axis=1)]


# --------------------------------------------------------------------------
# TOML io
# --------------------------------------------------------------------------


def _table_from(cls, table: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in known:
            raise ConfigurationError(f"unknown key {section}.{key}")
        if section == "device" and key not in COMPLEX_FIELDS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = parse_complex(value)
    return cls(**kwargs)


def spec_from_dict(data: dict) -> ScanSpec:
    unknown = set(data) - {"device", "boundary", "input_state", "solver", "scan"}
    if unknown:
        raise ConfigurationError(f"unknown section(s): {sorted(unknown)}")
    params = _table_from(WaveguideParams, data.get("device", {}), "device")
    bc = _table_from(BoundaryConditions, data.get("boundary", {}), "boundary")

    st = dict(data.get("input_state", {}))
    kwargs = {}
    for key, value in st.items():
        if key not in {"r", "theta", "n_ch", "xi"}:
            raise ConfigurationError(f"unknown key input_state.{key}")
        if isinstance(value, dict):
            values = [0.0] * 6
            for mode, v in value.items():
                values[mode_index(mode)] = v
        else:
            values = list(value)
        kwargs[key] = tuple(parse_complex(v) if key == "xi" else float(v) for v in values)
    state = InputState(**kwargs)

    solver = data.get("solver", {})
    opt_fields = {f.name for f in fields(BVPOptions)}
    for key in solver:
        if key not in opt_fields:
            raise ConfigurationError(f"unknown key solver.{key}")
    options = BVPOptions(**solver)

    scan = dict(data.get("scan", {}))
    axes = []
    for ax in scan.pop("axes", []):
        targets = ax.get("targets")
        if not targets:
            raise ConfigurationError(f"axis {ax.get('label', '?')!r} has no targets")
        parsed = tuple(_parse_target(t) for t in targets)
        for path, _ in parsed:
            check_path(path)
        count = int(ax.get("count", 101))
        if count < 1:
            raise ConfigurationError("axis count must be >= 1")
        axes.append(
            Axis(
                label=str(ax.get("label", parsed[0][0])),
                targets=parsed,
                start=float(ax["start"]),
                stop=float(ax.get("stop", ax["start"])),
                count=count,
            )
        )
    if len(axes) > 2:
        raise ConfigurationError("at most two scan axes are supported")
    names = tuple(scan.pop("observables", ()))
    valid = set(observable_names())
    for n in names:
        if n not in valid and not n.startswith("W:"):
            raise ConfigurationError(f"unknown observable {n!r}")
    extra = set(scan) - {"output_dir", "stem", "title", "zlabel"}
    if extra:
        raise ConfigurationError(f"unknown key(s) in scan: {sorted(extra)}")
    return ScanSpec(
        params=params,
        bc=bc,
        state=state,
        axes=tuple(axes),
        observables=names,
        options=options,
        output_dir=str(scan.get("output_dir", ".")),
        stem=str(scan.get("stem", "scan")),
        title=str(scan.get("title", "")),
        zlabel=str(scan.get("zlabel", "")),
    )


def spec_to_dict(spec: ScanSpec) -> dict:
    device = {}
    for f in fields(WaveguideParams):
        v = getattr(spec.params, f.name)
        device[f.name] = format_complex(v) if f.name in COMPLEX_FIELDS else float(v)
    boundary = {f.name: format_complex(getattr(spec.bc, f.name)) for f in fields(BoundaryConditions)}
    state = {
        "r": [float(v) for v in spec.state.r],
        "theta": [float(v) for v in spec.state.theta],
        "n_ch": [float(v) for v in spec.state.n_ch],
        "xi": [format_complex(v) for v in spec.state.xi],
    }
    solver = {f.name: getattr(spec.options, f.name) for f in fields(BVPOptions)}
    scan = {
        "stem": spec.stem,
        "output_dir": spec.output_dir,
        "title": spec.title,
        "zlabel": spec.zlabel,
        "observables": list(spec.observables),
        "axes": [
            {
                "label": a.label,
                "targets": [_format_target(p, f) for p, f in a.targets],
                "start": float(a.start),
                "stop": float(a.stop),
                "count": int(a.count),
            }
            for a in spec.axes
        ],
    }
    return {"device": device, "boundary": boundary, "input_state": state, "solver": solver, "scan": scan}


def dumps(spec: ScanSpec) -> str:
    return tomli_w.dumps(spec_to_dict(spec))


def loads(text: str) -> ScanSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML: {exc}") from exc
    return spec_from_dict(data)


def load(path) -> ScanSpec:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"invalid TOML in {path}: {exc}") from exc
    return spec_from_dict(data)


def dump(spec: ScanSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(spec))


__all__ = [
    "Axis",
    "ScanSpec",
    "parse_complex",
    "format_complex",
    "apply_values",
    "grid_points",
    "point_assignments",
    "load",
    "loads",
    "dump",
    "dumps",
    "MODES",
]
