"""Prebuilt scans for the published figures 2 to 12.

Ranges left open by the captions are chosen to bracket the described
features; see ``RANGE_NOTES``.
"""

from __future__ import annotations

from .config import Axis, ScanSpec
from .mean_field import BVPOptions
from .model import BoundaryConditions, ConfigurationError, InputState, WaveguideParams

DEFAULT_1D = 101
DEFAULT_2D = 61

# Recipes reaching K_p = 15, delta_p = 30 need a finer grid: the fluctuation
# integrator takes one RK4 step per interval, and at N = 1001 its signature
# error reaches 1.05e-8 there (about 1e-9 at N = 1501).
GRID_POINTS = {4: 1501, 9: 1501, 11: 1501}

RANGE_NOTES = {
    2: "L=2 assumed (caption gives none); K_p in [0, 3]",
    3: "delta_p in [0, 20]",
    4: "K_p in [0, 15], delta_p in [0, 30] brackets delta_p = 2|K_p|",
    5: "delta_s, delta_i in [-20, 20]; both (s_F,i_F) and (s_F,i_B) emitted",
    6: "A_pF in [0, 15]",
    7: "K_p in [0, 3] brackets the optimum near 1.4",
    8: "xi in [0, 30]",
    9: "K_p in [0, 15], delta_p in [0, 30]; only F_n < 1 plotted",
    10: "K_s, K_i in [0, 3]",
    11: "K_p in [0, 15], delta_p in [0, 30]",
    12: "A_pF in [0, 10], n_ch,s_F in [0, 300]",
}


def _fig2_base():
    params = WaveguideParams(k_f=0.05, k_b=0.05, length=2.0)
    bc = BoundaryConditions(a_sf0=0.1, a_if0=0.1, a_pf0=10.0)
    return params, bc, InputState()


def _fig6_base():
    params = WaveguideParams(k_f=0.05, k_b=0.05, length=2.0)
    bc = BoundaryConditions(a_pf0=10.0)
    return params, bc, InputState.coherent(s_F=-10.0, i_F=10.0)


def _axis(label, target, start, stop, count, *extra):
    targets = ((target, 1.0),) + tuple(extra)
    return Axis(label=label, targets=targets, start=float(start), stop=float(stop), count=count)


def emit_figure_recipe(figure: int, n1: int = DEFAULT_1D, n2: int = DEFAULT_2D, output_dir: str = ".") -> ScanSpec:
    """Scan reproducing figure ``figure`` (2..12) at the given axis resolutions."""
    from dataclasses import replace

    try:
        figure = int(figure)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"unknown figure id {figure!r}") from exc
    stem = f"fig{figure:02d}"
    lam = "principal squeeze variance"
    fano = "Fano factor F_n"

    if figure == 2:
        p, bc, st = _fig2_base()
        axes = (_axis("A_pF", "boundary.a_pf0", 0, 10, n2), _axis("K_p", "device.k_p", 0, 3, n2))
        obs, title, z = ("lambda:s_B+i_B",), "lambda of mode (s_B,i_B)", lam
    elif figure == 3:
        p, bc, st = _fig2_base()
        p = replace(p, k_p=5.0)
        axes = (_axis("delta_p", "device.delta_p", 0, 20, n1),)
        obs, title, z = ("lambda:s_F+i_F",), "lambda of mode (s_F,i_F)", lam
    elif figure == 4:
        p, bc, st = _fig2_base()
        p = replace(p, delta_f=5.0, delta_b=5.0)
        axes = (_axis("K_p", "device.k_p", 0, 15, n2), _axis("delta_p", "device.delta_p", 0, 30, n2))
        obs, title, z = ("lambda:s_F+i_F",), "lambda of mode (s_F,i_F)", lam
    elif figure == 5:
        p, bc, st = _fig2_base()
        p = replace(p, k_p=5.0, k_s=5.0, k_i=5.0)
        axes = (_axis("delta_s", "device.delta_s", -20, 20, n2), _axis("delta_i", "device.delta_i", -20, 20, n2))
        obs, title, z = ("lambda:s_F+i_F", "lambda:s_F+i_B"), "lambda of modes (s_F,i_F) and (s_F,i_B)", lam
    elif figure == 6:
        p, bc, st = _fig6_base()
        axes = (_axis("A_pF", "boundary.a_pf0", 0, 15, n1),)
        obs, title, z = ("fano:s_F+i_F",), "F_n of mode (s_F,i_F)", fano
    elif figure == 7:
        p, bc, st = _fig6_base()
        axes = (_axis("K_p", "device.k_p", 0, 3, n1),)
        obs, title, z = ("fano:s_F+i_F",), "F_n of mode (s_F,i_F)", fano
    elif figure == 8:
        p, bc, st = _fig6_base()
        p = replace(p, k_p=1.4)
        axes = (_axis("xi", "input_state.xi.i_F", 0, 30, n1, ("input_state.xi.s_F", -1.0)),)
        obs, title, z = ("fano:s_F+i_F",), "F_n of mode (s_F,i_F), xi_sF = -xi, xi_iF = xi", fano
    elif figure == 9:
        p, bc, st = _fig6_base()
        p = replace(p, length=1.0, delta_f=5.0, delta_b=5.0)
        axes = (_axis("K_p", "device.k_p", 0, 15, n2), _axis("delta_p", "device.delta_p", 0, 30, n2))
        obs, title, z = ("fano:s_F+i_F",), "F_n of mode (s_F,i_F)", fano
    elif figure == 10:
        p, bc, st = _fig6_base()
        p = replace(p, k_p=1.4)
        axes = (_axis("K_s", "device.k_s", 0, 3, n2), _axis("K_i", "device.k_i", 0, 3, n2))
        obs, title, z = ("fano:s_F+i_F",), "F_n of mode (s_F,i_F)", fano
    elif figure == 11:
        p, bc, st = _fig6_base()
        p = replace(p, delta_f=5.0, delta_b=5.0)
        st = InputState.coherent(s_F=10.0, i_F=10.0).replace_mode("n_ch", "s_F", 100.0)
        axes = (_axis("K_p", "device.k_p", 0, 15, n2), _axis("delta_p", "device.delta_p", 0, 30, n2))
        obs, title, z = ("R_W:s_F",), "R_W of mode s_F (incident 1.75)", "second reduced moment R_W"
    elif figure == 12:
        p, bc, st = _fig6_base()
        p = replace(p, k_p=8.0, delta_p=20.0, delta_f=5.0, delta_b=5.0)
        st = InputState.coherent(s_F=10.0, i_F=10.0)
        axes = (_axis("A_pF", "boundary.a_pf0", 0, 10, n2), _axis("n_ch_sF", "input_state.n_ch.s_F", 0, 300, n2))
        obs, title, z = ("T_W:s_F",), "T_W of mode s_F", "relative second reduced moment T_W"
    else:
        raise ConfigurationError(f"unknown figure id {figure}; expected 2..12")

    return ScanSpec(
        params=p,
        bc=bc,
        state=st,
        axes=axes,
        observables=obs,
        output_dir=output_dir,
        stem=stem,
        options=BVPOptions(n_points=GRID_POINTS.get(figure, BVPOptions.n_points)),
        title=f"Fig. {figure}: {title}",
        zlabel=z,
    )


FIGURES = tuple(range(2, 13))
