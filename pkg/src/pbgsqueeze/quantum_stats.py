"""Gaussian-state coefficients of the outgoing fields and derived observables.

A state is described as a superposition of signal and noise: coherent
amplitudes ``xi`` plus the noise coefficients

    B_j = <dA_j^+ dA_j>,  C_j = <dA_j^2>,
    D_jk = <dA_j dA_k>,   Dbar_jk = -<dA_j^+ dA_k>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fluctuation import InputOutputMatrix
from .model import MEAN_FIELD_TO_XI, MODES, InputState, input_anti_normal_coefficients, mode_index

# Intensities below this are treated as zero.
ZERO_INTENSITY = 1e-12


class UndefinedObservable(ArithmeticError):
    """Observable normalised by a vanishing mean intensity."""


@dataclass(frozen=True)
class OutputStatistics:
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    dbar: np.ndarray
    xi_out: np.ndarray
    # incident data, kept for input/output ratios
    b_in: np.ndarray | None = None
    c_in: np.ndarray | None = None
    xi_in: np.ndarray | None = None

    def incident(self) -> "OutputStatistics":
        """Statistics of the incident field itself (independent modes)."""
        if self.b_in is None:
            raise ValueError("incident data not recorded")
        zero = np.zeros((6, 6), dtype=complex)
        return OutputStatistics(self.b_in, self.c_in, zero, zero, self.xi_in)


def _idx(mode) -> int:
    return mode_index(mode) if isinstance(mode, str) else int(mode)


def output_coefficients(
    u: InputOutputMatrix | np.ndarray,
    state: InputState,
    mean_outputs: np.ndarray | None = None,
) -> OutputStatistics:
    """Propagate incident noise coefficients and coherent amplitudes through ``u``.

    ``mean_outputs`` are outgoing mean-field amplitudes (10^6 V/m); when
    given they are added to the coherent amplitudes after unit conversion.
    """
    u = u.u if isinstance(u, InputOutputMatrix) else np.asarray(u)
    b_in, c_in = input_anti_normal_coefficients(state)
    ua = u[0::2, 0::2]  # coefficient of a_k in output j
    ub = u[0::2, 1::2]  # coefficient of a_k^+ in output j
    cc = np.conj(c_in)

    b = np.sum(
        2.0 * np.real(np.conj(ua) * ub * cc) + np.abs(ua) ** 2 * (b_in - 1.0) + np.abs(ub) ** 2 * b_in,
        axis=1,
    )
    c = np.sum(ua**2 * c_in + ub**2 * cc + ua * ub * (2.0 * b_in - 1.0), axis=1)
    d = (
        np.einsum("jl,kl,l->jk", ua, ua, c_in)
        + np.einsum("jl,kl,l->jk", ub, ub, cc)
        + np.einsum("jl,kl,l->jk", ua, ub, b_in)
        + np.einsum("jl,kl,l->jk", ub, ua, b_in - 1.0)
    )
    dbar = -(
        np.einsum("jl,kl,l->jk", np.conj(ub), ua, c_in)
        + np.einsum("jl,kl,l->jk", np.conj(ua), ub, cc)
        + np.einsum("jl,kl,l->jk", np.conj(ua), ua, b_in - 1.0)
        + np.einsum("jl,kl,l->jk", np.conj(ub), ub, b_in)
    )
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(dbar, 0.0)

    xi_in = state.xi_array()
    stacked = np.empty(12, dtype=complex)
    stacked[0::2] = xi_in
    stacked[1::2] = np.conj(xi_in)
    xi_out = (u @ stacked)[0::2]
    if mean_outputs is not None:
        xi_out = xi_out + MEAN_FIELD_TO_XI * np.asarray(mean_outputs, dtype=complex)
    return OutputStatistics(
        b=b,
        c=c,
        d=d,
        dbar=dbar,
        xi_out=xi_out,
        b_in=b_in - 1.0,
        c_in=c_in,
        xi_in=xi_in,
    )


def principal_squeeze_single(stats: OutputStatistics, j) -> float:
    """1 + 2 (B_j - |C_j|); values below 1 mean squeezing."""
    j = _idx(j)
    return float(1.0 + 2.0 * (stats.b[j] - abs(stats.c[j])))


def principal_squeeze_compound(stats: OutputStatistics, j, k) -> float:
    """Principal squeeze variance of the compound quadrature q_j + q_k (squeezed below 2)."""
    j, k = _idx(j), _idx(k)
    if j == k:
        raise ValueError("compound mode needs two distinct modes")
    return float(
        2.0
        * (
            1.0
            + stats.b[j]
            + stats.b[k]
            - 2.0 * stats.dbar[j, k].real
            - abs(stats.c[j] + stats.c[k] + 2.0 * stats.d[j, k])
        )
    )


def intensity_moments(stats: OutputStatistics, j, k=None):
    """Normally ordered ``(<W_j>, <(dW_j)^2>, <dW_j dW_k>)``; the last is None without ``k``."""
    j = _idx(j)
    b, c, xi = stats.b[j], stats.c[j], stats.xi_out[j]
    mean = float(b + abs(xi) ** 2)
    var = float(b * b + abs(c) ** 2 + 2.0 * b * abs(xi) ** 2 + 2.0 * (c * np.conj(xi) ** 2).real)
    if k is None:
        return mean, var, None
    k = _idx(k)
    d, dbar, xk = stats.d[j, k], stats.dbar[j, k], stats.xi_out[k]
    cross = (
        abs(d) ** 2
        + abs(dbar) ** 2
        + 2.0 * (d * np.conj(xi) * np.conj(xk) - dbar * xi * np.conj(xk)).real
    )
    return mean, var, float(cross)


def _compound_moments(stats, modes):
    modes = [_idx(m) for m in (modes if isinstance(modes, (tuple, list)) else (modes,))]
    if len(modes) == 1:
        mean, var, _ = intensity_moments(stats, modes[0])
        return mean, var
    if len(modes) != 2 or modes[0] == modes[1]:
        raise ValueError("expected one mode or two distinct modes")
    j, k = modes
    wj, vj, cross = intensity_moments(stats, j, k)
    wk, vk, _ = intensity_moments(stats, k)
    return wj + wk, vj + vk + 2.0 * cross


def fano_factor(stats: OutputStatistics, modes) -> float:
    """Fano factor 1 + <(dW)^2>_N / <W>_N of one mode or of a compound mode.

    Raises
    ------
    UndefinedObservable
        When the mean intensity vanishes.
    """
    mean, var = _compound_moments(stats, modes)
    if mean < ZERO_INTENSITY:
        raise UndefinedObservable("zero mean intensity: Fano factor undefined")
    return 1.0 + var / mean


def reduced_moment(stats: OutputStatistics, j) -> float:
    """Second reduced moment <W^2>_N / <W>_N^2 of mode ``j``."""
    mean, var, _ = intensity_moments(stats, j)
    if mean < ZERO_INTENSITY:
        raise UndefinedObservable("zero mean intensity: reduced moment undefined")
    return 1.0 + var / mean**2


def second_reduced_moment(stats: OutputStatistics, j) -> tuple[float, float]:
    """``(R_W, T_W)`` of mode ``j``; ``T_W`` is R_W relative to the incident field."""
    r_out = reduced_moment(stats, j)
    r_in = reduced_moment(stats.incident(), j)
    return r_out, r_out / r_in


PAIRS = (("s_F", "i_F"), ("s_B", "i_B"), ("s_F", "i_B"), ("i_F", "s_B"))


def observable_names() -> list[str]:
    names = [f"lambda:{m}" for m in MODES]
    names += [f"lambda:{j}+{k}" for j, k in PAIRS]
    names += [f"fano:{m}" for m in MODES]
    names += [f"fano:{j}+{k}" for j, k in PAIRS]
    names += [f"R_W:{m}" for m in MODES]
    names += [f"T_W:{m}" for m in MODES]
    return names


def evaluate(stats: OutputStatistics, name: str) -> float | None:
    """Value of a named observable; None when it is undefined (zero intensity)."""
    kind, _, target = name.partition(":")
    modes = target.split("+")
    try:
        if kind == "lambda":
            if len(modes) == 1:
                return principal_squeeze_single(stats, modes[0])
            return principal_squeeze_compound(stats, *modes)
        if kind == "fano":
            return fano_factor(stats, tuple(modes))
        if kind == "R_W":
            return reduced_moment(stats, modes[0])
        if kind == "T_W":
            return second_reduced_moment(stats, modes[0])[1]
        if kind == "W":
            return _compound_moments(stats, tuple(modes))[0]
    except UndefinedObservable:
        return None
    raise KeyError(f"unknown observable {name!r}")


def observables(stats: OutputStatistics, names=None) -> dict[str, float | None]:
    return {n: evaluate(stats, n) for n in (names or observable_names())}
