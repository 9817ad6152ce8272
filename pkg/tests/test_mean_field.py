import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from pbgsqueeze.mean_field import (
    BVPError,
    BVPOptions,
    flux,
    linear_solution,
    rhs,
    solve_bvp,
    uniform_grid,
)
from pbgsqueeze.model import BoundaryConditions, WaveguideParams


def literal_pair(k, delta, a_f0, a_bl, z, length):
    """Direct cos/sin form of the uncoupled linear solution for one mode pair."""
    big = np.sqrt(complex(delta**2 / 4 - abs(k) ** 2))
    # f = c1 cos(big z) + c2 sin(big z) / big ; a_F = exp(-i delta z / 2) f
    # a_B = exp(i delta z / 2) (-i f' - delta f / 2) / k
    def fb(x):
        c, s = np.cos(big * x), np.sin(big * x)
        return (c, s / big), (-big * s, c)

    (c0, s0), _ = fb(0.0)
    (cl, sl), (dcl, dsl) = fb(length)
    ph = np.exp(0.5j * delta * length)
    m = np.array(
        [
            [c0, s0],
            [ph * (-1j * dcl - delta / 2 * cl) / k, ph * (-1j * dsl - delta / 2 * sl) / k],
        ]
    )
    c1, c2 = np.linalg.solve(m, [a_f0, a_bl])
    (c, s), (dc, ds) = fb(z)
    f = c1 * c + c2 * s
    df = c1 * dc + c2 * ds
    return np.exp(-0.5j * delta * z) * f, np.exp(0.5j * delta * z) * (-1j * df - delta / 2 * f) / k


def shoot(params, a0, length):
    """Integrate the mean-field equations from z = 0 with scipy."""

    def f(z, y):
        a = y[:6] + 1j * y[6:]
        d = rhs(params, z, a[:, None])[:, 0]
        return np.concatenate([d.real, d.imag])

    sol = solve_ivp(f, (0, length), np.concatenate([a0.real, a0.imag]), method="DOP853", rtol=1e-12, atol=1e-12)
    y = sol.y[:, -1]
    return y[:6] + 1j * y[6:]


def test_linear_example_band_gap():
    # [DERIVED] K_s = 1, delta = 0, L = 1: A_sF(L) = 1/cosh 1, |A_sB(0)| = tanh 1
    p = WaveguideParams(k_s=1.0, length=1.0)
    sol = linear_solution(p, BoundaryConditions(a_sf0=1.0), uniform_grid(1.0, 11))
    assert abs(sol.amplitudes[0, -1]) == pytest.approx(1 / math.cosh(1.0), abs=1e-14)
    assert abs(sol.amplitudes[3, 0]) == pytest.approx(math.tanh(1.0), abs=1e-14)


@pytest.mark.parametrize(
    "k, delta, length",
    [(1.0, 0.0, 1.0), (0.5 + 0.5j, 1.0, 2.0), (1.0, 4.0, 1.5), (2.0, 30.0, 2.0), (1.0, 2.0000001, 1.0)],
)
def test_linear_solution_matches_literal_form(k, delta, length):
    p = WaveguideParams(k_s=k, delta_s=delta, length=length)
    z = uniform_grid(length, 41)
    bc = BoundaryConditions(a_sf0=0.3 - 0.2j, a_sbL=0.5j)
    sol = linear_solution(p, bc, z)
    af, ab = literal_pair(k, delta, bc.a_sf0, bc.a_sbL, z, length)
    assert np.max(np.abs(sol.amplitudes[0] - af)) < 1e-9
    assert np.max(np.abs(sol.amplitudes[3] - ab)) < 1e-9


def test_oscillatory_pair_bounded_and_conserved():
    # [DERIVED] K_s = 1, delta_s = 4: oscillatory with Delta = sqrt(3)
    p = WaveguideParams(k_s=1.0, delta_s=4.0, length=3.0)
    z = uniform_grid(3.0, 301)
    sol = linear_solution(p, BoundaryConditions(a_sf0=1.0), z)
    inten = np.abs(sol.amplitudes[0]) ** 2 + np.abs(sol.amplitudes[3]) ** 2
    assert np.max(inten) < 10
    assert sol.flux_drift < 1e-12
    # the intensity pattern repeats with period pi / Delta
    spectrum = np.abs(np.fft.rfft(np.abs(sol.amplitudes[0]) ** 2 - np.mean(np.abs(sol.amplitudes[0]) ** 2)))
    assert spectrum.argmax() == round(3.0 * 2 * math.sqrt(3) / (2 * math.pi))


def test_linear_solution_against_independent_integration():
    p = WaveguideParams(k_s=0.8j, k_i=1.2, k_p=0.3 - 0.4j, delta_s=0.5, delta_i=5.0, delta_p=-1.0, length=1.7)
    bc = BoundaryConditions(0.1, 0.2j, 1.0, 0.3, 0.0, -0.5)
    sol = linear_solution(p, bc, uniform_grid(1.7, 3))
    end = shoot(p, sol.amplitudes[:, 0], 1.7)
    assert np.max(np.abs(end - sol.amplitudes[:, -1])) < 1e-9


@pytest.mark.parametrize("k", [0.0, 1e-300, 1e-12])
@pytest.mark.parametrize("delta", [0.0, 3.0, -3.0])
def test_weak_coupling_limit(k, delta):
    p = WaveguideParams(k_s=k, delta_s=delta, length=2.0)
    sol = linear_solution(p, BoundaryConditions(a_sf0=1.0, a_sbL=2j), uniform_grid(2.0, 9))
    assert np.max(np.abs(sol.amplitudes[0] - 1.0)) < 1e-11
    assert np.max(np.abs(sol.amplitudes[3] - 2j)) < 1e-11


def test_decoupled_pair_constant():
    sol = linear_solution(WaveguideParams(length=2.0), BoundaryConditions(a_sf0=2.0, a_pbL=1j), uniform_grid(2.0, 5))
    assert np.all(sol.amplitudes[0] == 2.0)
    assert np.all(sol.amplitudes[5] == 1j)


def random_linear_case(rng):
    k = rng.uniform(0.1, 3) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return k, rng.uniform(-8, 8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_linear_limit_newton_agrees_with_closed_form(seed):
    rng = np.random.default_rng(seed)
    (ks, ds), (ki, di), (kp, dp) = (random_linear_case(rng) for _ in range(3))
    length = rng.uniform(0.5, 2.5)
    p = WaveguideParams(k_s=ks, k_i=ki, k_p=kp, delta_s=ds, delta_i=di, delta_p=dp, length=length)
    bc = BoundaryConditions(*(rng.normal(size=6) + 1j * rng.normal(size=6)))
    grid = uniform_grid(length, 401)
    sol = solve_bvp(p, bc, grid, seed="ramp")
    ref = linear_solution(p, bc, grid)
    assert np.max(np.abs(sol.amplitudes - ref.amplitudes)) < 1e-7


def nonlinear_case():
    p = WaveguideParams(k_s=0.3, k_i=0.2j, k_p=1.4, k_f=0.05, k_b=0.05, delta_p=2.0, delta_f=1.0, delta_b=1.0, length=2.0)
    bc = BoundaryConditions(a_sf0=1.0, a_if0=0.5, a_pf0=10.0, a_sbL=0.2)
    return p, bc


def test_nonlinear_solution_satisfies_equations():
    p, bc = nonlinear_case()
    sol = solve_bvp(p, bc)
    assert sol.residual < 1e-10
    end = shoot(p, sol.amplitudes[:, 0], p.length)
    assert np.max(np.abs(end - sol.amplitudes[:, -1])) < 1e-7
    # boundary values as imposed
    assert sol.amplitudes[:3, 0] == pytest.approx(bc.as_array()[:3])
    assert sol.amplitudes[3:, -1] == pytest.approx(bc.as_array()[3:])
    assert sol.flux_drift < 1e-9


def test_seeds_converge_to_the_same_solution():
    p, bc = nonlinear_case()
    a = solve_bvp(p, bc, seed="linear").amplitudes
    b = solve_bvp(p, bc, seed="ramp").amplitudes
    assert np.max(np.abs(a - b)) < 1e-9


def test_grid_refinement_order():
    # fourth-order collocation; require at least order 1.8 from three grids
    p, bc = nonlinear_case()
    p = replace(p, k_f=0.1, k_b=0.1)
    ref = solve_bvp(p, bc, uniform_grid(p.length, 3201)).amplitudes[:, ::64]
    errs = []
    for n in (51, 101, 201):
        a = solve_bvp(p, bc, uniform_grid(p.length, n)).amplitudes[:, :: (n - 1) // 50]
        errs.append(np.max(np.abs(a - ref)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8), orders


def test_undepleted_pump_exact():
    # with no seeds the forward pump alone is an exact solution
    p = WaveguideParams(k_f=0.05, k_b=0.05, length=2.0)
    sol = solve_bvp(p, BoundaryConditions(a_pf0=10.0))
    assert np.all(sol.amplitudes[2] == 10.0)
    assert np.all(sol.amplitudes[[0, 1, 3, 4, 5]] == 0)


def test_failure_reports_residual():
    p, bc = nonlinear_case()
    with pytest.raises(BVPError) as info:
        solve_bvp(p, bc, options=BVPOptions(max_iter=1, homotopy_steps=2), seed="ramp")
    assert info.value.residual > 0


def test_bad_grids_rejected():
    p = WaveguideParams(length=1.0)
    with pytest.raises(ValueError):
        solve_bvp(p, BoundaryConditions(), grid=np.array([0.0, 0.5, 0.4, 1.0]))
    with pytest.raises(ValueError):
        solve_bvp(p, BoundaryConditions(), grid=np.linspace(0, 2, 5))


def test_flux_weights():
    a = np.ones((6, 1))
    assert flux(a)[0] == pytest.approx(0.0)
    assert flux(np.array([[0], [0], [1], [0], [0], [0]]))[0] == 2.0


def test_csv_export(tmp_path):
    p, bc = nonlinear_case()
    sol = solve_bvp(p, bc, uniform_grid(2.0, 21))
    sol.to_csv(tmp_path / "mf.csv")
    data = np.loadtxt(tmp_path / "mf.csv", delimiter=",", skiprows=1)
    assert data.shape == (21, 14)
    assert data[:, 1] + 1j * data[:, 2] == pytest.approx(sol.amplitudes[0])
