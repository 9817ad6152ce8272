"""Classical six-mode mean-field amplitudes along the waveguide.

Forward amplitudes are fixed at z = 0 and backward ones at z = L, so the
nonlinear coupled-mode equations form a two-point boundary-value problem.
It is solved by Newton relaxation on a collocation grid, seeded by the
closed-form solution of the linear (scattering-only) equations.

Amplitudes are stored in ``MODES`` order: (s_F, i_F, p_F, s_B, i_B, p_B).
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .model import BoundaryConditions, WaveguideParams

log = logging.getLogger(__name__)

FLUX_WEIGHTS = np.array([1.0, 1.0, 2.0, -1.0, -1.0, -2.0])

# Real unknowns per grid node: Re and Im of the six amplitudes.
_NV = 12
_FWD_ROWS = np.array([0, 1, 2, 6, 7, 8])
_BWD_ROWS = np.array([3, 4, 5, 9, 10, 11])
_BAND = 17


class BVPError(RuntimeError):
    """Newton relaxation failed to produce a solution."""

    def __init__(self, message: str, residual: float = float("nan"), z: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.z = z


class SingularMatchingError(BVPError):
    """The linear boundary-matching system of one mode pair is singular."""


@dataclass(frozen=True)
class BVPOptions:
    n_points: int = 1001
    tolerance: float = 1e-10
    max_iter: int = 50
    min_damping: float = 2.0**-10
    homotopy_steps: int = 16


@dataclass(frozen=True)
class MeanFieldSolution:
    grid: np.ndarray
    amplitudes: np.ndarray  # (6, N) complex
    flux: np.ndarray
    residual: float = 0.0
    iterations: int = 0

    @property
    def flux_drift(self) -> float:
        """max |D(z) - D(0)| / max(1, |D(0)|)."""
        d0 = self.flux[0]
        return float(np.max(np.abs(self.flux - d0)) / max(1.0, abs(d0)))

    def outputs(self) -> np.ndarray:
        """Outgoing amplitudes: forward modes at z = L, backward modes at z = 0."""
        return np.concatenate([self.amplitudes[:3, -1], self.amplitudes[3:, 0]])

    def to_csv(self, path) -> None:
        from .model import MODES

        header = ["z"]
        for m in MODES:
            header += [f"re_{m}", f"im_{m}"]
        header.append("flux")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n, z in enumerate(self.grid):
                row = [repr(float(z))]
                for a in self.amplitudes[:, n]:
                    row += [repr(float(a.real)), repr(float(a.imag))]
                row.append(repr(float(self.flux[n])))
                w.writerow(row)


def flux(amplitudes: np.ndarray) -> np.ndarray:
    """Conserved photon-flux combination for every column of ``amplitudes``."""
    return FLUX_WEIGHTS @ (np.abs(amplitudes) ** 2)


def uniform_grid(length: float, n_points: int) -> np.ndarray:
    if n_points < 2:
        raise ValueError("grid needs at least 2 points")
    return np.linspace(0.0, float(length), int(n_points))


def _check_grid(params: WaveguideParams, grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid needs at least 2 points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] != 0.0 or not np.isclose(grid[-1], params.length, rtol=1e-12, atol=0.0):
        raise ValueError("grid must span [0, length]")
    return grid


# --------------------------------------------------------------------------
# right-hand side and its Wirtinger derivatives
# --------------------------------------------------------------------------


def coefficients(params: WaveguideParams, z: np.ndarray):
    """z-dependent couplings (c_s, c_i, c_p, c_F, c_B) of the equations.

    ``c_a = i K_a exp(-i delta_a z)``, ``c_F = 2 K_F exp(i delta_F z)`` and
    ``c_B = 2 K_B exp(-i delta_B z)``.
    """
    z = np.asarray(z, dtype=float)
    cs = 1j * params.k_s * np.exp(-1j * params.delta_s * z)
    ci = 1j * params.k_i * np.exp(-1j * params.delta_i * z)
    cp = 1j * params.k_p * np.exp(-1j * params.delta_p * z)
    cf = 2.0 * params.k_f * np.exp(1j * params.delta_f * z)
    cb = 2.0 * params.k_b * np.exp(-1j * params.delta_b * z)
    return cs, ci, cp, cf, cb


def rhs(params: WaveguideParams, z, a: np.ndarray) -> np.ndarray:
    """dA/dz for amplitudes ``a`` of shape (6, ...) at positions ``z``."""
    cs, ci, cp, cf, cb = coefficients(params, z)
    sf, i_f, pf, sb, ib, pb = a
    return np.array(
        [
            cs * sb + cf * pf * np.conj(i_f),
            ci * ib + cf * pf * np.conj(sf),
            cp * pb - np.conj(cf) * sf * i_f,
            np.conj(cs) * sf - cb * pb * np.conj(ib),
            np.conj(ci) * i_f - cb * pb * np.conj(sb),
            np.conj(cp) * pf + np.conj(cb) * sb * ib,
        ]
    )


def wirtinger_jacobians(params: WaveguideParams, z, a: np.ndarray):
    """Return ``(J, Jc)`` with ``J = d f / d A`` and ``Jc = d f / d A*``.

    Shapes are (M, 6, 6) for ``a`` of shape (6, M).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    a = np.asarray(a, dtype=complex).reshape(6, -1)
    m = a.shape[1]
    cs, ci, cp, cf, cb = (np.broadcast_to(c, (m,)) for c in coefficients(params, z))
    sf, i_f, pf, sb, ib, pb = a
    j = np.zeros((m, 6, 6), dtype=complex)
    jc = np.zeros((m, 6, 6), dtype=complex)
    j[:, 0, 3] = cs
    j[:, 0, 2] = cf * np.conj(i_f)
    jc[:, 0, 1] = cf * pf
    j[:, 1, 4] = ci
    j[:, 1, 2] = cf * np.conj(sf)
    jc[:, 1, 0] = cf * pf
    j[:, 2, 5] = cp
    j[:, 2, 0] = -np.conj(cf) * i_f
    j[:, 2, 1] = -np.conj(cf) * sf
    j[:, 3, 0] = np.conj(cs)
    j[:, 3, 5] = -cb * np.conj(ib)
    jc[:, 3, 4] = -cb * pb
    j[:, 4, 1] = np.conj(ci)
    j[:, 4, 5] = -cb * np.conj(sb)
    jc[:, 4, 3] = -cb * pb
    j[:, 5, 2] = np.conj(cp)
    j[:, 5, 3] = np.conj(cb) * ib
    j[:, 5, 4] = np.conj(cb) * sb
    return j, jc


def _real_jacobian(j: np.ndarray, jc: np.ndarray) -> np.ndarray:
    """(M, 12, 12) real Jacobian acting on [Re A, Im A]."""
    s, d = j + jc, j - jc
    top = np.concatenate([s.real, -d.imag], axis=2)
    bottom = np.concatenate([s.imag, d.real], axis=2)
    return np.concatenate([top, bottom], axis=1)


def _to_real(a: np.ndarray) -> np.ndarray:
    """(6, N) complex -> (N, 12) real."""
    return np.concatenate([a.real, a.imag], axis=0).T.copy()


def _to_complex(x: np.ndarray) -> np.ndarray:
    return (x[:, :6] + 1j * x[:, 6:]).T


def midpoint_values(params: WaveguideParams, grid: np.ndarray, a: np.ndarray, f: np.ndarray | None = None):
    """Cubic Hermite interpolant of the profile at interval midpoints."""
    if f is None:
        f = rhs(params, grid, a)
    h = np.diff(grid)
    return 0.5 * (a[:, :-1] + a[:, 1:]) + h / 8.0 * (f[:, :-1] - f[:, 1:])


# --------------------------------------------------------------------------
# linear solution
# --------------------------------------------------------------------------


def _eigvec(k: complex, delta: float, lam: complex) -> np.ndarray:
    """Eigenvector of [[i d/2, i K], [-i K*, -i d/2]] for eigenvalue i*lam, in its better-conditioned form."""
    first = np.array([k, lam - 0.5 * delta], dtype=complex)
    second = np.array([lam + 0.5 * delta, -np.conj(k)], dtype=complex)
    return first if np.linalg.norm(first) >= np.linalg.norm(second) else second


def _pair_linear(k: complex, delta: float, a_f0: complex, a_bl: complex, z: np.ndarray, length: float, name: str):
    # (f, g) = (exp(i d z/2) A_F, exp(-i d z/2) A_B) obey a constant system (f, g)' = M (f, g)
    k = complex(k)
    big_delta = np.sqrt(complex(delta * delta / 4.0 - abs(k) ** 2))
    mat = np.array([[0.5j * delta, 1j * k], [-1j * np.conj(k), -0.5j * delta]])

    def basis(x):
        # (2, 2, len(x)): columns are two independent solutions
        x = np.asarray(x, dtype=float)
        if abs(big_delta) * length < 1.0:
            # fundamental matrix cos(Delta x) + sin(Delta x)/Delta M
            if abs(big_delta) * length < 1e-8:
                c, s = np.ones_like(x, dtype=complex), x.astype(complex)
            else:
                c, s = np.cos(big_delta * x), np.sin(big_delta * x) / big_delta
            return np.eye(2)[:, :, None] * c + mat[:, :, None] * s
        # decaying exponentials, one normalised at each end
        v1 = _eigvec(k, delta, big_delta)
        v2 = _eigvec(k, delta, -big_delta)
        e1 = np.exp(1j * big_delta * x)
        e2 = np.exp(-1j * big_delta * (x - length))
        return np.stack([v1[:, None] * e1, v2[:, None] * e2], axis=1)

    b0, bl = basis(0.0), basis(length)
    m = np.array([b0[0, :, 0], bl[1, :, 0]])
    scale = np.max(np.abs(m), axis=0)
    if np.any(scale == 0) or np.linalg.cond(m / scale) > 1e14:
        raise SingularMatchingError(f"boundary matching singular for mode pair ({name}_F, {name}_B)")
    coef = np.linalg.solve(m, np.array([a_f0, np.exp(-0.5j * delta * length) * a_bl], dtype=complex))
    f, g = np.einsum("abn,b->an", basis(z), coef)
    return np.exp(-0.5j * delta * z) * f, np.exp(0.5j * delta * z) * g


def linear_solution(params: WaveguideParams, bc: BoundaryConditions, grid) -> MeanFieldSolution:
    """Closed-form amplitudes with the nonlinear couplings switched off.

    Each (a_F, a_B) pair evolves independently as
    ``exp(-i delta z/2) f(z)`` and ``exp(i delta z/2) g(z)`` where
    ``(f, g)`` solves a constant 2 x 2 system with eigenvalues
    ``+-i Delta``, ``Delta = sqrt(delta**2/4 - |K|**2)`` on the principal
    branch. For ``|Delta| L < 1`` the fundamental matrix
    ``cos(Delta z) + sin(Delta z)/Delta M`` is used; otherwise decaying
    exponentials, which keep deep band-gap cases well conditioned. No step
    divides by K, so weak and vanishing couplings are handled uniformly.
    """
    grid = _check_grid(params, grid)
    bcv = bc.as_array()
    amps = np.empty((6, grid.size), dtype=complex)
    for n, ((k, delta), name) in enumerate(zip(params.linear(), "sip")):
        amps[n], amps[n + 3] = _pair_linear(k, delta, bcv[n], bcv[n + 3], grid, params.length, name)
    return MeanFieldSolution(grid=grid, amplitudes=amps, flux=flux(amps))


# --------------------------------------------------------------------------
# Newton relaxation
# --------------------------------------------------------------------------


def _residual(params, grid, x, bcv):
    """Collocation residual (12 N,) and the per-node data needed by the Jacobian."""
    a = _to_complex(x)
    f = rhs(params, grid, a)
    h = np.diff(grid)
    zm = grid[:-1] + 0.5 * h
    am = midpoint_values(params, grid, a, f)
    fm = rhs(params, zm, am)
    r_int = a[:, 1:] - a[:, :-1] - h / 6.0 * (f[:, :-1] + 4.0 * fm + f[:, 1:])
    r_int = _to_real(r_int)  # (N-1, 12)
    x0 = x[0]
    xl = x[-1]
    b0 = np.concatenate([x0[_FWD_ROWS[:3]] - bcv[:3].real, x0[_FWD_ROWS[3:]] - bcv[:3].imag])
    bl = np.concatenate([xl[_BWD_ROWS[:3]] - bcv[3:].real, xl[_BWD_ROWS[3:]] - bcv[3:].imag])
    res = np.concatenate([b0, r_int.ravel(), bl])
    return res, (a, am, zm, h, r_int)


def _scaled_norm(r_int: np.ndarray, h: np.ndarray, x: np.ndarray) -> float:
    defect = np.max(np.abs(r_int) / h[:, None]) if r_int.size else 0.0
    return float(defect / max(1.0, np.max(np.abs(x))))


@lru_cache(maxsize=8)
def _band_layout(n: int):
    """Flat positions in banded storage for the boundary and interval blocks."""
    size = _NV * n
    width = size

    def flat(rows, cols):
        return (_BAND + rows - cols) * width + cols

    q = np.arange(6)
    bc_pos = np.concatenate([flat(q, _FWD_ROWS), flat(size - 6 + q, size - _NV + _BWD_ROWS)])
    k = np.arange(n - 1)[:, None, None]
    i = np.arange(_NV)[None, :, None]
    jj = np.arange(_NV)[None, None, :]
    rows = 6 + _NV * k + i
    left_pos = flat(rows, _NV * k + jj).ravel()
    right_pos = flat(rows, _NV * (k + 1) + jj).ravel()
    return bc_pos, left_pos, right_pos


def _banded_jacobian(params, grid, a, am, zm, h):
    n = grid.size
    eye = np.eye(_NV)
    rk = _real_jacobian(*wirtinger_jacobians(params, grid, a))
    rm = _real_jacobian(*wirtinger_jacobians(params, zm, am))
    hh = h[:, None, None]
    left = -eye - hh / 6.0 * (rk[:-1] + 4.0 * rm @ (0.5 * eye + hh / 8.0 * rk[:-1]))
    right = eye - hh / 6.0 * (rk[1:] + 4.0 * rm @ (0.5 * eye - hh / 8.0 * rk[1:]))

    bc_pos, left_pos, right_pos = _band_layout(n)
    ab = np.zeros((2 * _BAND + 1, _NV * n))
    flat = ab.reshape(-1)
    flat[bc_pos] = 1.0
    flat[left_pos] = left.ravel()
    flat[right_pos] = right.ravel()
    return ab


def _newton(params, grid, x, bcv, options: BVPOptions):
    res, data = _residual(params, grid, x, bcv)
    norm = _scaled_norm(data[4], data[3], x) + float(np.max(np.abs(res[:6])) + np.max(np.abs(res[-6:])))
    for it in range(options.max_iter + 1):
        if norm <= options.tolerance:
            return x, norm, it
        if it == options.max_iter:
            break
        a, am, zm, h, _ = data
        ab = _banded_jacobian(params, grid, a, am, zm, h)
        try:
            step = solve_banded((_BAND, _BAND), ab, -res, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            m = re.search(r"(\d+)", str(exc))
            z_at = float(grid[min(int(m.group(1)) // _NV, grid.size - 1)]) if m else None
            raise BVPError(f"singular Newton Jacobian near z={z_at}", norm, z_at) from exc
        step = step.reshape(x.shape)
        t = 1.0
        while True:
            x_new = x + t * step
            res_new, data_new = _residual(params, grid, x_new, bcv)
            norm_new = _scaled_norm(data_new[4], data_new[3], x_new)
            if np.isfinite(norm_new) and (norm_new < norm or t <= options.min_damping):
                break
            t *= 0.5
        if not np.isfinite(norm_new):
            break
        x, res, data, norm = x_new, res_new, data_new, norm_new
        log.debug("newton iteration %d: residual %.3e (damping %.3g)", it + 1, norm, t)
    raise BVPError(f"Newton relaxation did not converge (residual {norm:.3e})", norm)


def _solution(grid, x, norm, iters) -> MeanFieldSolution:
    a = _to_complex(x)
    return MeanFieldSolution(grid=grid, amplitudes=a, flux=flux(a), residual=norm, iterations=iters)


def _ramp_seed(bc: BoundaryConditions, grid) -> np.ndarray:
    bcv = bc.as_array()
    t = grid / grid[-1]
    a = np.empty((6, grid.size), dtype=complex)
    a[:3] = bcv[:3, None] * (1.0 - 0.5 * t)
    a[3:] = bcv[3:, None] * (0.5 + 0.5 * t)
    return a


def solve_bvp(
    params: WaveguideParams,
    bc: BoundaryConditions,
    grid=None,
    options: BVPOptions | None = None,
    seed: str | np.ndarray = "linear",
) -> MeanFieldSolution:
    """Solve the nonlinear mean-field boundary-value problem.

    Uses fourth-order Hermite-Simpson collocation with Newton iteration
    (analytic Jacobian, banded solve, step halving). The iteration starts
    from :func:`linear_solution` (``seed="linear"``), from a boundary ramp
    (``seed="ramp"``) or from a given (6, N) array; if Newton fails it
    continues in the nonlinear constants from zero up to their targets.

    Raises
    ------
    BVPError
        On non-convergence or a singular Jacobian.
    """
    options = options or BVPOptions()
    if grid is None:
        grid = uniform_grid(params.length, options.n_points)
    grid = _check_grid(params, grid)
    bcv = bc.as_array()

    if isinstance(seed, str):
        if seed not in ("linear", "ramp"):
            raise ValueError(f"unknown seed {seed!r}")
        try:
            seed = linear_solution(params, bc, grid).amplitudes if seed == "linear" else _ramp_seed(bc, grid)
        except SingularMatchingError:
            seed = _ramp_seed(bc, grid)
    seed = np.asarray(seed, dtype=complex)
    if seed.shape != (6, grid.size):
        raise ValueError(f"seed must have shape (6, {grid.size})")
    try:
        x, norm, it = _newton(params, grid, _to_real(seed), bcv, options)
        return _solution(grid, x, norm, it)
    except BVPError as exc:
        if params.k_f == 0 and params.k_b == 0:
            raise
        log.info("direct Newton failed (%s); continuing in the nonlinear couplings", exc)
    return _homotopy(params, bc, grid, seed, options)


def _homotopy(params, bc, grid, seed, options):
    bcv = bc.as_array()
    steps = max(2, options.homotopy_steps)
    fractions = np.concatenate([[0.0], np.geomspace(2.0 ** -(steps - 2), 1.0, steps - 1)])
    x = _to_real(seed)
    total = 0
    norm = float("nan")
    for frac in fractions:
        p = replace(params, k_f=params.k_f * frac, k_b=params.k_b * frac)
        x, norm, it = _newton(p, grid, x, bcv, options)
        total += it
    return _solution(grid, x, norm, total)
