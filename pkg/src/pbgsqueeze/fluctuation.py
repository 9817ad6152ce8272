"""Linearized quantum fluctuations around a mean-field solution.

Operator corrections are stacked as a 12-vector
``(dA_1, dA_1^+, ..., dA_6, dA_6^+)`` in ``MODES`` order; the first six
entries belong to forward modes (block F), the last six to backward
modes (block B).

Two matrices are produced:

``PropagationMatrix``
    maps the whole stack at z = 0 to the stack at z = L;
``InputOutputMatrix``
    maps physical inputs (F at z = 0, B at z = L) to physical outputs
    (F at z = L, B at z = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mean_field
from .mean_field import MeanFieldSolution
from .model import WaveguideParams

F = slice(0, 6)
B = slice(6, 12)

# Commutator metric [x_m, x_n^+] of the physical input/output stacking.
IO_METRIC = np.diag(np.tile([1.0, -1.0], 6))
# In the z-ordered stacking the backward pairs carry the opposite sign.
PROPAGATION_METRIC = np.diag(np.concatenate([np.tile([1.0, -1.0], 3), np.tile([-1.0, 1.0], 3)]))


class FluctuationError(RuntimeError):
    pass


class GridTooCoarseError(FluctuationError):
    pass


class ConjugationSymmetryError(FluctuationError):
    pass


# Relative tolerance on the adjoint-row symmetry of computed matrices.
CONJUGATION_TOLERANCE = 1e-9


class SingularBackwardBlockError(FluctuationError):
    def __init__(self, condition: float):
        super().__init__(f"backward block of the propagation matrix is singular (condition number {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True)
class PropagationMatrix:
    m: np.ndarray

    @property
    def blocks(self):
        m = self.m
        return m[F, F], m[F, B], m[B, F], m[B, B]


@dataclass(frozen=True)
class InputOutputMatrix:
    u: np.ndarray

    def to_csv(self, path) -> None:
        """24 x 24 real layout: entry (i, k) -> rows 2i, 2i+1 and columns 2k, 2k+1 as [[Re, -Im], [Im, Re]]."""
        real = np.empty((24, 24))
        real[0::2, 0::2] = self.u.real
        real[0::2, 1::2] = -self.u.imag
        real[1::2, 0::2] = self.u.imag
        real[1::2, 1::2] = self.u.real
        np.savetxt(path, real, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "InputOutputMatrix":
        real = np.loadtxt(path, delimiter=",")
        return cls(real[0::2, 0::2] + 1j * real[1::2, 0::2])


def coupling_matrix(params: WaveguideParams, z, amplitudes: np.ndarray) -> np.ndarray:
    """Coefficient matrices of d(stack)/dz = M(z) stack, shape (M, 12, 12).

    Each operator equation contributes its row ``2j`` and the adjoint
    equation contributes row ``2j + 1`` with conjugated coefficients.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    a = np.asarray(amplitudes, dtype=complex).reshape(6, -1)
    ks, ki, kp, kf, kb = (np.broadcast_to(c, z.shape) for c in mean_field.coefficients(params, z))
    sf, i_f, pf, sb, ib, pb = a
    conj = np.conj
    # (target mode, source mode, source is adjoint, coefficient)
    terms = [
        (0, 3, False, ks),
        (0, 1, True, kf * pf),
        (0, 2, False, kf * conj(i_f)),
        (1, 4, False, ki),
        (1, 0, True, kf * pf),
        (1, 2, False, kf * conj(sf)),
        (3, 0, False, conj(ks)),
        # the s_B equation couples to the adjoint operator dA_iB^+
        (3, 4, True, -kb * pb),
        (3, 5, False, -kb * conj(ib)),
        (4, 1, False, conj(ki)),
        (4, 3, True, -kb * pb),
        (4, 5, False, -kb * conj(sb)),
        (2, 5, False, kp),
        (2, 1, False, -conj(kf) * sf),
        (2, 0, False, -conj(kf) * i_f),
        (5, 2, False, conj(kp)),
        (5, 4, False, conj(kb) * sb),
        (5, 3, False, conj(kb) * ib),
    ]
    m = np.zeros((z.size, 12, 12), dtype=complex)
    for target, source, dagger, coef in terms:
        col = 2 * source + int(dagger)
        m[:, 2 * target, col] += coef
        m[:, 2 * target + 1, 2 * source + int(not dagger)] += conj(coef)
    return m


def step_matrices(params: WaveguideParams, mf: MeanFieldSolution) -> np.ndarray:
    """Classical RK4 one-step propagators for every grid interval, shape (N-1, 12, 12)."""
    grid, a = mf.grid, mf.amplitudes
    h = np.diff(grid)[:, None, None]
    zm = grid[:-1] + 0.5 * np.diff(grid)
    am = mean_field.midpoint_values(params, grid, a)
    m_nodes = coupling_matrix(params, grid, a)
    m0, m1 = m_nodes[:-1], m_nodes[1:]
    mm = coupling_matrix(params, zm, am)
    eye = np.eye(12)
    k1 = m0
    k2 = mm @ (eye + 0.5 * h * k1)
    k3 = mm @ (eye + 0.5 * h * k2)
    k4 = m1 @ (eye + h * k3)
    return eye + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _doubled_step_error(params: WaveguideParams, mf: MeanFieldSolution, steps: np.ndarray) -> float:
    """Step-doubling error estimate: RK4 over interval pairs vs. two single steps."""
    grid, a = mf.grid, mf.amplitudes
    n_pairs = (grid.size - 1) // 2
    if n_pairs == 0:
        return 0.0
    idx = 2 * np.arange(n_pairs)
    h = (grid[idx + 2] - grid[idx])[:, None, None]
    m0 = coupling_matrix(params, grid[idx], a[:, idx])
    mm = coupling_matrix(params, grid[idx + 1], a[:, idx + 1])
    m1 = coupling_matrix(params, grid[idx + 2], a[:, idx + 2])
    eye = np.eye(12)
    k1 = m0
    k2 = mm @ (eye + 0.5 * h * k1)
    k3 = mm @ (eye + 0.5 * h * k2)
    k4 = m1 @ (eye + h * k3)
    coarse = eye + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    fine = steps[idx + 1] @ steps[idx]
    return float(np.sum(np.max(np.abs(coarse - fine), axis=(1, 2))) / 15.0)


def propagate_basis(
    params: WaveguideParams,
    mf: MeanFieldSolution,
    tolerance: float | None = 1e-5,
) -> PropagationMatrix:
    """Integrate the 12 canonical initial vectors from z = 0 to z = L.

    ``tolerance`` bounds the step-doubling error estimate; ``None`` skips
    the check.

    Raises
    ------
    GridTooCoarseError
        If the estimate exceeds ``tolerance``.
    """
    steps = step_matrices(params, mf)
    _check_resolution(params, mf, steps, tolerance)
    p = np.eye(12, dtype=complex)
    for s in steps:
        p = s @ p
    return PropagationMatrix(p)


def _check_resolution(params, mf, steps, tolerance):
    if tolerance is None:
        return
    err = _doubled_step_error(params, mf, steps)
    if not err <= tolerance:
        raise GridTooCoarseError(f"mean-field grid too coarse: step-doubling estimate {err:.3e} > {tolerance:.1e}")


def _rearrange(m: np.ndarray) -> np.ndarray:
    """Block rearrangement of (..., 12, 12) propagation matrices."""
    pff, pfb, pbf, pbb = m[..., F, F], m[..., F, B], m[..., B, F], m[..., B, B]
    inv_bb = np.linalg.inv(pbb)
    u = np.empty(m.shape, dtype=complex)
    u[..., F, F] = pff - pfb @ inv_bb @ pbf
    u[..., F, B] = pfb @ inv_bb
    u[..., B, F] = -inv_bb @ pbf
    u[..., B, B] = inv_bb
    return u


def to_input_output(p: PropagationMatrix) -> InputOutputMatrix:
    """Rearrange a z-ordered propagation matrix into input-output form.

    Raises
    ------
    SingularBackwardBlockError
        If the backward-backward block cannot be inverted.
    """
    cond = np.linalg.cond(p.m[B, B])
    if not np.isfinite(cond) or cond > 1e13:
        raise SingularBackwardBlockError(cond)
    return InputOutputMatrix(_rearrange(p.m))


def _chain(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    a1, b1, c1, d1 = first[..., F, F], first[..., F, B], first[..., B, F], first[..., B, B]
    a2, b2, c2, d2 = second[..., F, F], second[..., F, B], second[..., B, F], second[..., B, B]
    # internal forward field: (1 - b1 c2)^-1 (a1 F_in + b1 d2 B_in)
    x = np.linalg.solve(np.eye(6) - b1 @ c2, np.concatenate([a1, b1], axis=-1))
    x_a1, x_b1 = x[..., :, :6], x[..., :, 6:]
    u = np.empty(np.broadcast_shapes(first.shape, second.shape), dtype=complex)
    u[..., F, F] = a2 @ x_a1
    u[..., F, B] = a2 @ x_b1 @ d2 + b2
    u[..., B, F] = c1 + d1 @ c2 @ x_a1
    u[..., B, B] = d1 @ c2 @ x_b1 @ d2 + d1 @ d2
    return u


def compose(first: InputOutputMatrix, second: InputOutputMatrix) -> InputOutputMatrix:
    """Input-output matrix of two adjacent sections (``first`` nearer z = 0)."""
    return InputOutputMatrix(_chain(first.u, second.u))


def input_output_matrix(
    params: WaveguideParams,
    mf: MeanFieldSolution,
    tolerance: float | None = 1e-5,
) -> InputOutputMatrix:
    """Input-output matrix of the whole waveguide.

    Every RK4 step propagator is converted to input-output form and the
    pieces are chained pairwise (a balanced tree of :func:`compose`). Unlike
    a single z = 0 -> L propagation matrix this stays well conditioned for
    strongly evanescent (band-gap) configurations.

    The adjoint rows are integrated independently; their agreement with
    the conjugated operator rows is checked on the result.
    """
    steps = step_matrices(params, mf)
    _check_resolution(params, mf, steps, tolerance)
    pieces = _rearrange(steps)
    while len(pieces) > 1:
        paired = _chain(pieces[0 : len(pieces) - 1 : 2], pieces[1::2])
        if len(pieces) % 2:
            paired = np.concatenate([paired, pieces[-1:]])
        pieces = paired
    u = pieces[0]
    defect = conjugation_defect(u)
    if not defect <= CONJUGATION_TOLERANCE * max(1.0, float(np.max(np.abs(u)))):
        raise ConjugationSymmetryError(f"adjoint rows disagree with operator rows by {defect:.3e}")
    return InputOutputMatrix(u)


def verify_signature(u: InputOutputMatrix | np.ndarray, metric: np.ndarray = IO_METRIC) -> float:
    """max |U S U^+ - S| for the commutator metric S."""
    u = u.u if isinstance(u, InputOutputMatrix) else np.asarray(u)
    return float(np.max(np.abs(u @ metric @ u.conj().T - metric)))


def conjugation_defect(m: np.ndarray) -> float:
    """Largest violation of the adjoint-row symmetry m[2j+1, 2k+1-q] == conj(m[2j, 2k+q])."""
    m = np.asarray(m)
    swap = np.arange(12) ^ 1
    partner = np.conj(m[0::2][:, swap])
    return float(np.max(np.abs(m[1::2] - partner)))
