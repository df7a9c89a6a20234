import math

import numpy as np
import pytest

from rotstokes.exterior import (
    ClosureError,
    SpectralGrid,
    b_omega_boundary_identity,
    b_omega_coefficient,
    remainder_decay_report,
    solution_grid_data,
    solve_exterior_linear,
    torque_coefficient,
)
from rotstokes.fields import CutoffProfile, perp
from rotstokes.forcings import gaussian_tensor
from rotstokes.gridio import read_grid_file, write_grid_file
from rotstokes.wholeplane import CompactForcing, TensorForcing, stokes_residual

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def lift_forcing(alpha, R0=1.0):
    """``F`` whose exterior solution is ``alpha x^perp / |x|^2 - alpha phi x^perp``."""
    cf = CutoffProfile(R0)

    def F(x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        return alpha * (cf(r)[..., None, None] * J + perp(x)[..., :, None] * (cf.dr(r) / r)[..., None, None] * x[..., None, :])

    def div(x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        return (alpha * (3 * cf.dr(r) + r * cf.drr(r)) / r)[..., None] * perp(x)

    return TensorForcing(F, support_radius=2 * R0, div=div), cf


@pytest.fixture(scope="module")
def gaussian_solution():
    return solve_exterior_linear(0.1, gaussian_tensor(1.0), SpectralGrid(), gamma=0.5)


@pytest.mark.parametrize("alpha,R0", [(0.05, 1.0), (1.0, 1.0), (-3.0, 2.0)])
def test_lifted_vortex_closed_form(alpha, R0):
    F, cf = lift_forcing(alpha, R0)
    s = solve_exterior_linear(alpha, F, SpectralGrid(n_theta=16, n_r=48, R0=R0), cutoff=cf)
    pts = s.grid_points()
    r = np.hypot(pts[..., 0], pts[..., 1])
    exact = alpha * perp(pts) / r[..., None] ** 2 - alpha * cf(r)[..., None] * perp(pts)
    assert np.max(r * np.hypot(*(s.u - exact).transpose(2, 0, 1))) < 1e-9
    assert abs(s.beta - 4 * math.pi * alpha) <= 1e-8 * abs(4 * math.pi * alpha)
    assert torque_coefficient(s) == s.beta


def test_axisymmetric_swirl_closed_form():
    # u = v(r) e_theta with v = (r-1)^2 exp(-(r-1)); the drift term vanishes
    def v(r):
        return (r - 1) ** 2 * np.exp(-(r - 1))

    def f(x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        s = r - 1
        e = np.exp(-s)
        dv = (2 * s - s * s) * e
        ddv = (2 - 4 * s + s * s) * e
        ft = -(ddv + dv / r - v(r) / r**2)
        return (ft / r)[..., None] * perp(x)

    alpha = 0.3
    s = solve_exterior_linear(alpha, CompactForcing(f, 60.0, check=False), SpectralGrid(n_theta=16, n_r=64))
    pts = s.grid_points()
    r = np.hypot(pts[..., 0], pts[..., 1])
    exact = (v(r) / r)[..., None] * perp(pts)
    assert np.max(np.abs(s.u - exact)) < 1e-9
    assert abs(s.beta) < 1e-8


def test_zero_forcing_gives_zero():
    s = solve_exterior_linear(0.5, None, SpectralGrid())
    assert np.max(np.abs(s.u)) == 0.0
    assert s.beta == 0.0
    s0 = solve_exterior_linear(0.0, None, SpectralGrid())
    assert np.max(np.abs(s0.u)) == 0.0


def test_alpha_zero_with_data_rejected():
    with pytest.raises(ValueError):
        solve_exterior_linear(0.0, gaussian_tensor(1.0), SpectralGrid())


def test_energy_estimate(gaussian_solution):
    s = gaussian_solution
    F = gaussian_tensor(1.0)
    W = s.quadrature_weights()
    Fs = np.asarray(F.F(s.grid_points().reshape(-1, 2))).reshape(s.u.shape + (2,))
    F_l2 = math.sqrt(np.sum(W * np.sum(Fs**2, axis=(2, 3))))
    assert s.norms.l2_grad <= 1.05 * F_l2


@pytest.fixture(scope="module")
def fine_solution():
    return solve_exterior_linear(0.1, gaussian_tensor(1.0), SpectralGrid(n_theta=64, n_r=96), gamma=0.5)


def test_beta_stable_under_grid_doubling(gaussian_solution, fine_solution):
    assert abs(fine_solution.beta - gaussian_solution.beta) < 1e-8


def test_strong_form_residual(fine_solution):
    F = gaussian_tensor(1.0)
    for x in ([1.7, 0.3], [-2.5, 1.0], [5.0, 5.0]):
        mom, div = stokes_residual(fine_solution.evaluate, fine_solution.evaluate_pressure, 0.1, np.array(x), 1e-3, F.div)
        assert np.max(np.abs(mom)) < 1e-5 and abs(div) < 1e-6


def test_residual_falls_with_resolution(gaussian_solution, fine_solution):
    F = gaussian_tensor(1.0)
    x = np.array([-2.5, 1.0])
    coarse = stokes_residual(gaussian_solution.evaluate, gaussian_solution.evaluate_pressure, 0.1, x, 1e-3, F.div)[0]
    fine = stokes_residual(fine_solution.evaluate, fine_solution.evaluate_pressure, 0.1, x, 1e-3, F.div)[0]
    assert np.max(np.abs(fine)) < 0.01 * np.max(np.abs(coarse))


def test_no_slip_and_divergence(gaussian_solution, fine_solution):
    assert gaussian_solution.diagnostics["boundary_speed"] < 1e-12
    assert fine_solution.diagnostics["max_div"] < 1e-6 < gaussian_solution.diagnostics["max_div"]


def test_b_omega_two_routes():
    F = gaussian_tensor(1.0, center=(1.5, 0.5))
    for R0 in (1.0, 2.0):
        b = b_omega_coefficient(F, CutoffProfile(R0))
        assert abs(b - b_omega_boundary_identity(F)) < 1e-9


def test_remainder_decays(gaussian_solution):
    rep = remainder_decay_report(gaussian_solution, 0.5)
    vals = [rep["radii"][k] for k in sorted(rep["radii"])]
    assert vals[-1] < vals[0]
    assert rep["fitted_constant"] < 10.0


def test_grid_file_round_trip(tmp_path, gaussian_solution):
    gd = solution_grid_data(gaussian_solution)
    path = tmp_path / "sol.grid"
    write_grid_file(path, gd)
    back = read_grid_file(path)
    np.testing.assert_array_equal(back.values, gd.values)
    assert float(back.metadata["beta"]) == gaussian_solution.beta


@pytest.mark.parametrize(
    "kw", [dict(n_theta=15), dict(n_theta=8), dict(n_r=16), dict(r_max=4.0), dict(R0=0.5), dict(R0=3.0, r_max=10.0)]
)
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        SpectralGrid(**kw)


def test_cutoff_must_match_grid():
    with pytest.raises(ValueError):
        solve_exterior_linear(0.1, None, SpectralGrid(), cutoff=CutoffProfile(2.0))


def test_closure_error_class():
    assert issubclass(ClosureError, RuntimeError)
