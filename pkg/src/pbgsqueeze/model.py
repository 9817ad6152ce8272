"""Device, boundary and input-state parametrizations.

Units (scaled, as used throughout the package):

* coupling constants and detunings in mm^-1 (nonlinear constants in
  10^-6 mm^-1 m V^-1), lengths in mm;
* mean-field amplitudes in 10^6 V/m;
* fluctuation amplitudes ``xi`` in units of 10 V/m, so that ``|xi|**2`` is a
  mean photon number.

Mode order is fixed everywhere as ``MODES``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field, fields, replace

import numpy as np

MODES = ("s_F", "i_F", "p_F", "s_B", "i_B", "p_B")
FORWARD = (0, 1, 2)
BACKWARD = (3, 4, 5)

# Converts a mean-field amplitude (10^6 V/m) to fluctuation units (10 V/m).
MEAN_FIELD_TO_XI = 1.0e5


class ConfigurationError(ValueError):
    """Raised when a device or state description is invalid."""


def mode_index(name: str) -> int:
    try:
        return MODES.index(name)
    except ValueError:
        raise ConfigurationError(f"unknown mode {name!r}; expected one of {MODES}") from None


@dataclass(frozen=True)
class WaveguideParams:
    k_s: complex = 0.0
    k_i: complex = 0.0
    k_p: complex = 0.0
    k_f: complex = 0.0
    k_b: complex = 0.0
    delta_s: float = 0.0
    delta_i: float = 0.0
    delta_p: float = 0.0
    delta_f: float = 0.0
    delta_b: float = 0.0
    length: float = 1.0

    def linear(self) -> tuple[tuple[complex, float], ...]:
        """(K_a, delta_a) for a = s, i, p."""
        return (
            (complex(self.k_s), float(self.delta_s)),
            (complex(self.k_i), float(self.delta_i)),
            (complex(self.k_p), float(self.delta_p)),
        )

    @property
    def psi(self) -> float:
        """Gauge-invariant phase -arg K_p + arg K_s + arg K_i."""
        return -cmath.phase(self.k_p) + cmath.phase(self.k_s) + cmath.phase(self.k_i)


@dataclass(frozen=True)
class BoundaryConditions:
    a_sf0: complex = 0.0
    a_if0: complex = 0.0
    a_pf0: complex = 0.0
    a_sbL: complex = 0.0
    a_ibL: complex = 0.0
    a_pbL: complex = 0.0

    def as_array(self) -> np.ndarray:
        """Boundary amplitudes in mode order (forward at z=0, backward at z=L)."""
        return np.array(
            [self.a_sf0, self.a_if0, self.a_pf0, self.a_sbL, self.a_ibL, self.a_pbL],
            dtype=complex,
        )


def _six(value=0.0):
    return field(default_factory=lambda: (value,) * 6)


@dataclass(frozen=True)
class InputState:
    """Incident Gaussian state of the six modes, one entry per mode in ``MODES`` order.

    Each mode carries a squeezed-chaotic noise part (``r``, ``theta``,
    ``n_ch``) superposed on a coherent amplitude ``xi``. The modes are
    statistically independent.
    """

    r: tuple[float, ...] = _six(0.0)
    theta: tuple[float, ...] = _six(0.0)
    n_ch: tuple[float, ...] = _six(0.0)
    xi: tuple[complex, ...] = _six(0.0)

    def __post_init__(self):
        for f in fields(self):
            value = tuple(getattr(self, f.name))
            if len(value) != 6:
                raise ConfigurationError(f"input_state.{f.name} needs 6 entries, got {len(value)}")
            object.__setattr__(self, f.name, value)

    @classmethod
    def coherent(cls, **xi: complex) -> "InputState":
        """Coherent (or vacuum) state; keyword names are mode names, e.g. ``s_F=-10``."""
        amps = [0j] * 6
        for name, value in xi.items():
            amps[mode_index(name)] = complex(value)
        return cls(xi=tuple(amps))

    def replace_mode(self, attr: str, mode: str, value) -> "InputState":
        values = list(getattr(self, attr))
        values[mode_index(mode)] = value
        return replace(self, **{attr: tuple(values)})

    def xi_array(self) -> np.ndarray:
        return np.array(self.xi, dtype=complex)


def input_anti_normal_coefficients(state: InputState) -> tuple[np.ndarray, np.ndarray]:
    """Anti-normally ordered incident coefficients ``(B_in, C_in)`` per mode.

    ``B = cosh(r)**2 + n_ch`` and ``C = exp(i theta) sinh(2 r) / 2``.
    Cross-mode coefficients vanish for independent incident fields.
    """
    r = np.asarray(state.r, dtype=float)
    theta = np.asarray(state.theta, dtype=float)
    n_ch = np.asarray(state.n_ch, dtype=float)
    b = np.cosh(r) ** 2 + n_ch
    c = 0.5 * np.exp(1j * theta) * np.sinh(2.0 * r)
    return b, c


def _check_finite(prefix: str, obj) -> None:
    for f in fields(obj):
        value = getattr(obj, f.name)
        values = value if isinstance(value, tuple) else (value,)
        for k, v in enumerate(values):
            try:
                ok = cmath.isfinite(complex(v))
            except (TypeError, ValueError):
                ok = False
            if not ok:
                where = f"{prefix}.{f.name}" + (f"[{MODES[k]}]" if isinstance(value, tuple) else "")
                raise ConfigurationError(f"{where} must be finite, got {v!r}")


def validate(
    params: WaveguideParams,
    bc: BoundaryConditions,
    state: InputState | None = None,
) -> tuple[WaveguideParams, BoundaryConditions, InputState | None]:
    """Check a configuration and return it unchanged.

    Raises
    ------
    ConfigurationError
        Naming the offending field.
    """
    _check_finite("device", params)
    for name in ("delta_s", "delta_i", "delta_p", "delta_f", "delta_b", "length"):
        if complex(getattr(params, name)).imag != 0.0:
            raise ConfigurationError(f"device.{name} must be real")
    if not params.length > 0:
        raise ConfigurationError("device.length must be positive")
    _check_finite("boundary", bc)
    if state is not None:
        _check_finite("input_state", state)
        for k, mode in enumerate(MODES):
            if state.r[k] < 0:
                raise ConfigurationError(f"input_state.r[{mode}] must be >= 0")
            if state.n_ch[k] < 0:
                raise ConfigurationError(f"input_state.n_ch[{mode}] must be >= 0")
        amps = bc.as_array()
        for k, mode in enumerate(MODES):
            if amps[k] != 0 and state.xi[k] != 0:
                raise ConfigurationError(
                    f"input_state.xi[{mode}] must be zero when the mode carries a mean field"
                )
    return params, bc, state


def regauge(
    params: WaveguideParams,
    bc: BoundaryConditions,
    state: InputState,
    alpha: float,
    beta: float,
) -> tuple[WaveguideParams, BoundaryConditions, InputState]:
    """Equivalent configuration with K_s, K_i, K_p rotated by alpha, beta, alpha + beta.

    psi is unchanged. Backward signal, idler and pump amplitudes (mean
    fields, coherent inputs and squeeze phases) are co-rotated by
    -alpha, -beta and -(alpha + beta); forward modes are untouched.
    """
    rot = np.array([0.0, 0.0, 0.0, alpha, beta, alpha + beta])
    phase = np.exp(-1j * rot)
    new_params = replace(
        params,
        k_s=complex(params.k_s) * cmath.exp(1j * alpha),
        k_i=complex(params.k_i) * cmath.exp(1j * beta),
        k_p=complex(params.k_p) * cmath.exp(1j * (alpha + beta)),
    )
    amps = bc.as_array() * phase
    new_bc = BoundaryConditions(*(complex(a) for a in amps))
    new_state = replace(
        state,
        theta=tuple(float(t - 2.0 * a) for t, a in zip(state.theta, rot)),
        xi=tuple(complex(x * ph) for x, ph in zip(state.xi, phase)),
    )
    return new_params, new_bc, new_state


def vacuum() -> InputState:
    return InputState()


def is_physical_input(b: np.ndarray, c: np.ndarray) -> bool:
    """True when (B-1) B >= |C|^2 for every mode."""
    return bool(np.all((b - 1.0) * b >= np.abs(c) ** 2 - 1e-12 * np.maximum(1.0, b * b)))


__all__ = [
    "MODES",
    "FORWARD",
    "BACKWARD",
    "MEAN_FIELD_TO_XI",
    "ConfigurationError",
    "WaveguideParams",
    "BoundaryConditions",
    "InputState",
    "input_anti_normal_coefficients",
    "validate",
    "regauge",
    "vacuum",
    "mode_index",
    "is_physical_input",
]
