import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from pbgsqueeze.fluctuation import (
    IO_METRIC,
    PROPAGATION_METRIC,
    GridTooCoarseError,
    InputOutputMatrix,
    PropagationMatrix,
    SingularBackwardBlockError,
    compose,
    conjugation_defect,
    coupling_matrix,
    input_output_matrix,
    propagate_basis,
    step_matrices,
    to_input_output,
    verify_signature,
)
from pbgsqueeze.mean_field import linear_solution, solve_bvp, uniform_grid
from pbgsqueeze.model import BoundaryConditions, WaveguideParams


def amplifier(k_f=0.05, a_p=10.0, length=2.0):
    p = WaveguideParams(k_f=k_f, k_b=k_f, length=length)
    return p, solve_bvp(p, BoundaryConditions(a_pf0=a_p))


def test_amplifier_block_closed_form():
    # [DERIVED] constant pump: (dA_sF, dA_iF+) evolves with (cosh gz, sinh gz; sinh gz, cosh gz), g = 2 K_F A_p
    p, mf = amplifier()
    m = propagate_basis(p, mf).m
    g = 2 * 0.05 * 10.0
    ch, sh = math.cosh(2 * g), math.sinh(2 * g)
    assert m[0, 0] == pytest.approx(ch, abs=1e-8)
    assert m[0, 3] == pytest.approx(sh, abs=1e-8)
    assert m[3, 0] == pytest.approx(sh, abs=1e-8)
    assert m[2, 1] == pytest.approx(sh, abs=1e-8)
    # the pump fluctuations are untouched without signal/idler mean fields
    assert m[4, 4] == pytest.approx(1.0, abs=1e-12)


def test_linear_input_output_matches_mean_field_transmission():
    # linear dynamics of fluctuations and mean fields coincide: U entries equal the
    # closed-form response to a unit input
    p = WaveguideParams(k_s=1.0 + 0.5j, k_i=0.7, k_p=2.0, delta_s=0.5, delta_i=3.0, delta_p=1.0, length=2.0)
    grid = uniform_grid(2.0, 1001)
    mf = linear_solution(p, BoundaryConditions(), grid)
    u = input_output_matrix(p, mf).u
    resp_f = linear_solution(p, BoundaryConditions(a_sf0=1.0), grid).outputs()
    resp_b = linear_solution(p, BoundaryConditions(a_pbL=1.0), grid).outputs()
    out_rows = 2 * np.arange(6)
    assert u[out_rows, 0] == pytest.approx(resp_f, abs=1e-9)
    assert u[out_rows, 10] == pytest.approx(resp_b, abs=1e-9)
    # passive linear device: no mixing of operators with adjoints
    assert np.max(np.abs(u[0::2, 1::2])) < 1e-14


def test_rk4_against_adaptive_integration():
    # [DERIVED] brute-force integration of the same coupling matrix, mean field from a spline
    p = WaveguideParams(k_s=0.4j, k_i=0.3, k_p=1.1, k_f=0.05, k_b=0.05, delta_p=1.0, delta_f=0.5, delta_b=0.5, length=1.0)
    mf = solve_bvp(p, BoundaryConditions(a_sf0=2.0, a_pf0=10.0, a_ibL=1.0), uniform_grid(1.0, 2001))
    splines = [CubicSpline(mf.grid, mf.amplitudes[k]) for k in range(6)]

    def f(z, y):
        a = np.array([spl(z) for spl in splines])
        return (coupling_matrix(p, z, a[:, None])[0] @ y.reshape(12, 12)).ravel()

    sol = solve_ivp(f, (0, 1.0), np.eye(12, dtype=complex).ravel(), method="DOP853", rtol=1e-11, atol=1e-12)
    ref = sol.y[:, -1].reshape(12, 12)
    assert np.max(np.abs(propagate_basis(p, mf).m - ref)) < 1e-8


def nonlinear_case():
    p = WaveguideParams(k_s=0.5, k_i=0.5j, k_p=3.0, k_f=0.05, k_b=0.05, delta_p=6.0, delta_f=2.0, delta_b=2.0, length=2.0)
    bc = BoundaryConditions(a_sf0=0.1, a_if0=0.1, a_pf0=10.0)
    return p, solve_bvp(p, bc)


def test_signature_and_conjugation_structure():
    p, mf = nonlinear_case()
    prop = propagate_basis(p, mf)
    u = input_output_matrix(p, mf)
    assert verify_signature(prop.m, PROPAGATION_METRIC) < 1e-9 * np.max(np.abs(prop.m)) ** 2
    assert verify_signature(u) < 1e-9
    assert conjugation_defect(prop.m) < 1e-12 * np.max(np.abs(prop.m))
    assert conjugation_defect(u.u) < 1e-12


def test_tree_composition_matches_direct_rearrangement():
    p, mf = nonlinear_case()
    direct = to_input_output(propagate_basis(p, mf)).u
    tree = input_output_matrix(p, mf).u
    assert np.max(np.abs(direct - tree)) < 1e-10


def test_compose_with_identity_and_sections():
    p, mf = nonlinear_case()
    u = input_output_matrix(p, mf)
    ident = InputOutputMatrix(np.eye(12, dtype=complex))
    assert np.max(np.abs(compose(ident, u).u - u.u)) < 1e-13
    assert np.max(np.abs(compose(u, ident).u - u.u)) < 1e-13
    # two halves composed give the whole device
    steps = step_matrices(p, mf)
    n = len(steps) // 2
    halves = []
    for part in (steps[:n], steps[n:]):
        m = np.eye(12, dtype=complex)
        for s in part:
            m = s @ m
        halves.append(to_input_output(PropagationMatrix(m)))
    assert np.max(np.abs(compose(*halves).u - u.u)) < 1e-10


def test_band_gap_case_stays_accurate():
    # deep band gap for the pump: direct propagation matrices grow like exp(2 |K| L)
    p = WaveguideParams(k_p=10.0, delta_p=21.0, k_f=0.05, k_b=0.05, delta_f=5.0, delta_b=5.0, length=2.0)
    mf = solve_bvp(p, BoundaryConditions(a_pf0=10.0, a_sf0=0.1, a_if0=0.1))
    u = input_output_matrix(p, mf)
    assert verify_signature(u) < 1e-8


def test_singular_backward_block():
    m = np.eye(12, dtype=complex)
    m[6:, 6:] = 0.0
    with pytest.raises(SingularBackwardBlockError) as info:
        to_input_output(PropagationMatrix(m))
    assert info.value.condition > 1e13


def test_coarse_grid_detected():
    p = WaveguideParams(k_p=10.0, delta_p=40.0, k_f=0.05, k_b=0.05, length=2.0)
    mf = solve_bvp(p, BoundaryConditions(a_pf0=10.0, a_sf0=0.1), uniform_grid(2.0, 41))
    with pytest.raises(GridTooCoarseError):
        input_output_matrix(p, mf)


def test_metrics():
    assert np.array_equal(np.diag(IO_METRIC), np.tile([1, -1], 6))
    assert np.array_equal(np.diag(PROPAGATION_METRIC)[6:], np.tile([-1, 1], 3))


def test_csv_round_trip(tmp_path):
    p, mf = nonlinear_case()
    u = input_output_matrix(p, mf)
    u.to_csv(tmp_path / "u.csv")
    raw = np.loadtxt(tmp_path / "u.csv", delimiter=",")
    assert raw.shape == (24, 24)
    back = InputOutputMatrix.from_csv(tmp_path / "u.csv")
    assert np.array_equal(back.u, u.u)
