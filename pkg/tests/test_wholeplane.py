import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rotstokes.forcings import algebraic_tensor, bump_tensor, compact_suite, gaussian_tensor
from rotstokes.gridio import GridData
from rotstokes.wholeplane import (
    CompactForcing,
    PolarRule,
    TensorForcing,
    coefficient_c,
    coefficient_c_tilde,
    divergence_form_potential,
    forcing_from_grid,
    pressure_potential,
    stokes_residual,
    volume_potential,
)

SLOPED = bump_tensor(1.0, ((0.3, 1.0), (-0.4, 0.2)), 1.0, ((0.1, 0.2), (0.0, 0.3)), n_r=8, n_theta=32)


def _c_tilde_bump(M, R):
    # int (1 - r^2/R^2)^4 over the disk is pi R^2 / 5; the x_1 N part integrates to 0
    return (M[0][1] - M[1][0]) * math.pi * R * R / 5.0


SUITE = [
    (((1.0, 0.0), (0.0, 1.0)), 1.0),
    (((0.0, 1.0), (-1.0, 0.0)), 1.0),
    (((0.3, 1.0), (-0.4, 0.2)), 1.5),
    (((2.0, -0.7), (0.1, -1.0)), 0.75),
    (((0.0, 0.5), (0.0, 0.0)), 2.0),
]


@pytest.mark.parametrize("i", range(5))
def test_compact_suite_coefficients(i):
    F = compact_suite()[i]
    M, R = SUITE[i]
    exact = _c_tilde_bump(M, R)
    ct = coefficient_c_tilde(F)
    c = coefficient_c(F.as_compact_forcing())
    assert abs(ct - exact) <= 1e-12 * max(1.0, abs(exact))
    assert abs(c - ct) <= 1e-8


def test_gaussian_c_tilde_closed_form():
    F = gaussian_tensor(0.7, width=1.3)
    # (M12 - M21) eps pi w^2
    exact = 1.4 * 0.7 * math.pi * 1.3**2
    assert abs(coefficient_c_tilde(F) - exact) <= 1e-10


def test_symmetric_algebraic_tensor_has_no_coefficient():
    assert abs(coefficient_c_tilde(algebraic_tensor(1.0, quad_radius=100.0, panel_width=10.0))) < 1e-12


@pytest.mark.parametrize(
    "F",
    [
        gaussian_tensor(1.0),
        bump_tensor(1.0, radius=2.0, slope=((0.5, -0.2), (0.3, 1.0))),
        algebraic_tensor(1.0),
    ],
    ids=["gaussian", "bump", "algebraic"],
)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_analytic_divergence_matches_differences(F, x1, x2):
    x = np.array([[x1, x2]])
    if F.compact and abs(np.hypot(x1, x2) - F.radius) < 0.05:
        return
    fd = TensorForcing(F.F, gamma=F.gamma, support_radius=F.support_radius, quad_radius=F.quad_radius).divergence(x)
    np.testing.assert_allclose(F.divergence(x), fd, atol=1e-7)


def test_algebraic_tensor_has_critical_decay():
    F = algebraic_tensor(1.0)
    r = np.array([1e2, 1e4, 1e6])
    vals = np.sqrt(np.sum(F.F(np.stack([r, 0 * r], axis=-1)) ** 2, axis=(1, 2))) * r**2
    assert np.all(np.diff(vals) < 0) and vals[-1] < 0.1
    with pytest.raises(ValueError):
        algebraic_tensor(1.0, matrix=((0.0, 1.0), (0.0, 0.0)))


@given(st.integers(0, 3), st.integers(0, 3))
def test_polar_rule_integrates_monomials(p, q):
    rule = PolarRule(0.0, 2.0, n_r=8, n_theta=16, panel_width=0.7)
    pts, w, _ = rule.nodes()
    val = float(np.sum(w * pts[:, 0] ** (2 * p) * pts[:, 1] ** (2 * q)))
    # int over the disk of x^2p y^2q = 2 B(p+1/2, q+1/2) R^(2p+2q+2) / (2p+2q+2)
    beta = math.gamma(p + 0.5) * math.gamma(q + 0.5) / math.gamma(p + q + 1)
    exact = 2.0 * beta * 2.0 ** (2 * p + 2 * q + 2) / (2 * p + 2 * q + 2)
    assert math.isclose(val, exact, rel_tol=1e-12)


def test_compact_forcing_support_check():
    with pytest.raises(ValueError):
        CompactForcing(lambda x: np.ones_like(x), 1.0)
    with pytest.raises(ValueError):
        TensorForcing(lambda x: 0 * x, gamma=0.5)
    with pytest.raises(ValueError):
        TensorForcing(lambda x: 0 * x, gamma=1.0, quad_radius=1.0)
    with pytest.raises(ValueError):
        gaussian_tensor(1.0).as_compact_forcing()


def test_two_routes_to_the_same_potential():
    # u = int Gamma div F = -int grad_y Gamma F after one integration by parts
    f = SLOPED.as_compact_forcing()
    pv = volume_potential(f, 0.5, radii=(), tol=1e-11)
    pd = divergence_form_potential(SLOPED, 0.5, radii=(), tol=1e-11)
    x = np.array([[3.0, 1.0], [-2.0, 2.5]])
    np.testing.assert_allclose(pv.u(x), pd.u(x), atol=1e-9)
    xin = np.array([[0.4, 0.3]])
    np.testing.assert_allclose(pv.u(xin), pd.u(xin), atol=1e-5)
    assert pv.coefficient == pytest.approx(pd.coefficient, abs=1e-12)


def test_far_field_is_the_circular_vortex():
    pv = volume_potential(SLOPED.as_compact_forcing(), 1.0, radii=(8.0, 16.0, 32.0), n_dir=4, tol=1e-10)
    vals = [pv.remainder_report[r] for r in (8.0, 16.0, 32.0)]
    assert vals[0] > vals[1] > vals[2]
    x = np.array([[40.0, 10.0]])
    lead = pv.leading(x)
    assert np.linalg.norm(pv.remainder(x)) < 0.05 * np.linalg.norm(lead)


def test_near_field_correction_is_resolution_stable():
    x = np.array([[0.3, 0.2]])
    vals = []
    for n_r, n_th in ((8, 32), (12, 48)):
        F = bump_tensor(1.0, ((0.3, 1.0), (-0.4, 0.2)), 1.0, n_r=n_r, n_theta=n_th)
        vals.append(volume_potential(F.as_compact_forcing(), 0.5, radii=(), tol=1e-10).u(x))
    np.testing.assert_allclose(vals[0], vals[1], atol=1e-6)


def test_residual_second_order_outside_support():
    f = SLOPED.as_compact_forcing()
    pv = volume_potential(f, 0.5, radii=(), tol=1e-12)
    pres = pressure_potential(f)
    x = np.array([1.6, 0.7])
    errs = []
    for h in (0.2, 0.1):
        mom, div = stokes_residual(pv.u, pres, 0.5, x, h, f.f)
        errs.append(max(np.max(np.abs(mom)), abs(div)))
    assert 1.8 < math.log2(errs[0] / errs[1]) < 2.3


def test_pressure_is_harmonic_outside_support():
    f = SLOPED.as_compact_forcing()
    p = pressure_potential(f)
    x, h = np.array([2.5, -1.0]), 1e-2
    st_ = np.array([x, x + [h, 0], x - [h, 0], x + [0, h], x - [0, h]])
    P = p(st_)
    lap = (P[1:].sum() - 4 * P[0]) / h**2
    assert abs(lap) < 1e-5


def test_forcing_from_grid():
    ax = np.linspace(-1.0, 1.0, 21)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    vals = np.stack([(1 - X**2) * (1 - Y**2), 0 * X], axis=-1)
    g = GridData("cartesian", (-1.0, 1.0, -1.0, 1.0), (21, 21), ("f1", "f2"), vals)
    f = forcing_from_grid(g, R=1.0, n_r=8, n_theta=32)
    np.testing.assert_allclose(f.f(np.array([[0.0, 0.0], [0.5, 0.0]])), [[1.0, 0.0], [0.75, 0.0]], atol=1e-4)
    assert np.all(f.f(np.array([[1.2, 0.0]])) == 0.0)
    with pytest.raises(ValueError):
        forcing_from_grid(GridData("cartesian", (-1.0, 1.0, -1.0, 1.0), (21, 21), ("u1", "u2"), vals))
