import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotstokes.exterior import SpectralGrid
from rotstokes.forcings import algebraic_tensor, gaussian_tensor
from rotstokes.nssolver import (
    NSProblem,
    NonConvergenceError,
    OutOfRegimeError,
    absorber_curl_mean,
    energy_balance,
    fixed_point_map,
    forcing_norms,
    mollified_forcing,
    picard_solve,
    random_ball_iterate,
    smallness_diagnostic,
    stream_iterate,
    threshold_triple,
    x0_distance,
    zero_iterate,
)

GRID = SpectralGrid()


@pytest.fixture(scope="module")
def vortex():
    return picard_solve(0.05, None, GRID)


@pytest.fixture(scope="module")
def gaussian_problem():
    return NSProblem(0.1, gaussian_tensor(0.01), GRID, gamma=0.5)


def test_exact_vortex_regression(vortex):
    s = vortex.solution
    assert vortex.iterations <= 30
    assert vortex.distances[-1] <= 1e-10
    assert abs(s.beta - 4 * math.pi * 0.05) <= 1e-6 * 4 * math.pi * 0.05
    pts = s.problem.pts
    r2 = np.sum(pts**2, axis=-1)
    exact = 0.05 * np.stack([-pts[..., 1], pts[..., 0]], axis=-1) / r2[..., None]
    err = np.sqrt(r2) * np.hypot(*(s.velocity() - exact).transpose(2, 0, 1))
    assert np.max(err) <= 1e-6


def test_vortex_remainder_is_supported_in_the_ramp(vortex):
    # a x^perp/|x|^2 = a U + 4 pi a V + a phi x^perp (1/|x|^2 - 1)
    s = vortex.solution
    p = s.problem
    r = np.hypot(p.pts[..., 0], p.pts[..., 1])
    phi = p.cutoff(r)
    exact = 0.05 * (phi * (1.0 / r**2 - 1.0))[..., None] * np.stack([-p.pts[..., 1], p.pts[..., 0]], axis=-1)
    assert np.max(np.abs(s.w - exact)) < 1e-8
    assert np.max(np.abs(s.w[r >= 2.0])) < 1e-8


def test_absorbed_term_is_a_gradient():
    p = NSProblem(0.05, None, GRID)
    assert absorber_curl_mean(4 * math.pi * 0.05, p) < 1e-8


@pytest.mark.parametrize("beta", [0.0, 0.3])
def test_stream_iterate_is_solenoidal_and_vanishes_on_boundary(gaussian_problem, beta):
    it = stream_iterate(gaussian_problem, beta, [0.0, 0.5 + 0.2j, -0.3j], decay=1.5)
    div = it.grad_w[..., 0, 0] + it.grad_w[..., 1, 1]
    assert np.max(np.abs(div)) < 1e-6 * np.max(np.abs(it.grad_w))
    assert np.max(np.abs(it.w[0])) < 1e-14
    assert it.beta == beta


def test_x0_distance_is_a_metric(gaussian_problem):
    rng = np.random.default_rng(5)
    a, b, c = (random_ball_iterate(gaussian_problem, rng, 1.0) for _ in range(3))
    assert x0_distance(a, a) == 0.0
    assert x0_distance(a, b) == pytest.approx(x0_distance(b, a))
    assert x0_distance(a, c) <= x0_distance(a, b) + x0_distance(b, c) + 1e-14
    assert x0_distance(a, zero_iterate(gaussian_problem)) == pytest.approx(a.x0_norm())


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3.0))
def test_random_ball_iterate_respects_radius(gaussian_problem, seed, radius):
    it = random_ball_iterate(gaussian_problem, np.random.default_rng(seed), radius)
    assert it.x0_norm() <= radius * (1 + 1e-12)


def test_contraction_on_random_pairs(gaussian_problem):
    t = threshold_triple(0.1, forcing_norms(gaussian_problem))
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(4):
        w1 = random_ball_iterate(gaussian_problem, rng, t.delta1)
        w2 = random_ball_iterate(gaussian_problem, rng, t.delta1)
        d1 = x0_distance(fixed_point_map(w1, gaussian_problem), fixed_point_map(w2, gaussian_problem))
        ratios.append(d1 / x0_distance(w1, w2))
    assert max(ratios) <= 0.8


def test_energy_identity_gamma_positive():
    res = picard_solve(0.1, gaussian_tensor(0.01), GRID, gamma=0.5)
    assert res.energy["relative_residual"] <= 1e-6
    assert res.residual["relative"] <= 1e-4
    assert res.torque_consistency < 1e-8


def test_mollified_sequence_converges():
    F0 = algebraic_tensor(0.01)
    ref = picard_solve(0.1, F0, GRID, gamma=0.0)
    assert ref.energy["inequality_holds"]
    d = []
    for n in (10, 100, 1000):
        r = picard_solve(0.1, mollified_forcing(F0, n), GRID, gamma=0.5)
        d.append(x0_distance(r.solution, ref.solution))
    assert d[0] > d[1] > d[2]
    s, p = ref.solution, ref.solution.problem
    tails = [np.max(p.r[p.r >= R, None] * np.hypot(*s.w[p.r >= R].transpose(2, 0, 1))) for R in (10, 20, 40)]
    assert tails[0] > tails[1] > tails[2]


def test_mollified_forcing_divergence():
    F = gaussian_tensor(1.0)
    Fn = mollified_forcing(F, 5.0)
    x = np.array([[1.0, 0.5], [2.0, -1.0]])
    h = 1e-4
    fd = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd += (Fn.F(x + e) - Fn.F(x - e))[:, :, j] / (2 * h)
    np.testing.assert_allclose(Fn.div(x), fd, atol=1e-7)
    with pytest.raises(ValueError):
        mollified_forcing(F, 0.5)


def test_threshold_triple_ordering(gaussian_problem):
    t = threshold_triple(0.1, forcing_norms(gaussian_problem))
    assert t.delta3 >= t.delta2 > 0 and t.delta1 > 0
    with pytest.raises(OutOfRegimeError):
        threshold_triple(0.5, forcing_norms(gaussian_problem))


def test_smallness_diagnostic():
    m, flags = smallness_diagnostic(0.1, 0.2, 0.3, {"grad_l2": 0.5, "linf1": 0.4})
    expected = 0.3 * 0.5 + 0.2 * 0.4 + 0.4 * 0.5 * abs(math.log(0.5)) + 0.1 + 0.3
    assert m == pytest.approx(expected)
    assert flags == []
    assert smallness_diagnostic(0.1, 0.0, 0.0, {"grad_l2": 2.0, "linf1": 0.0})[1] == ["grad_w_not_small"]


def test_energy_balance_on_vortex(vortex):
    e = energy_balance(vortex.solution)
    assert e["inequality_holds"]


def test_large_data_does_not_converge():
    with pytest.raises(NonConvergenceError):
        picard_solve(0.1, gaussian_tensor(200.0), GRID, max_iter=15)


def test_alpha_zero_with_data_out_of_regime():
    p = NSProblem(0.0, gaussian_tensor(0.01), GRID)
    with pytest.raises(OutOfRegimeError):
        fixed_point_map(zero_iterate(p), p)
