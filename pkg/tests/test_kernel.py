import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rotstokes import _kernel_py
from rotstokes import kernel as K

# Independent oracle (mpmath, 25 digits): the defining time integral with
# exp(-lam t), written directly from G, phi1 and phi2.
REGULARISED_ORACLE = [
    (
        (3.0, 0.0),
        (0.5, 0.0),
        1.0,
        1.0,
        [[0.0112675256051657264, 0.010298336700404113], [0.00564191435480393257, -0.00964175273329221366]],
    ),
    (
        (2.0, 1.0),
        (0.3, -0.4),
        0.5,
        0.2,
        [[-0.000639484480518730747, 0.0417347701839702135], [0.0139773053946458699, 0.0103322029920060346]],
    ),
]

# alpha != 0, lam = 0: the integral converges only through rotation.  Oracle:
# scipy quadrature period by period for 300 periods, the remaining period
# sums fitted by n^-2 ... n^-8 and summed with the Hurwitz zeta function.
ROTATING_ORACLE = [
    (
        (4.0, 0.0),
        (1.0, 0.0),
        1.0,
        [[0.001222684872789368, 0.014777016228230294], [0.015258582202486362, 0.011091188603440395]],
    ),
    (
        (2.0, 1.0),
        (0.3, -0.4),
        2.0,
        [[-0.020384301679902656, 0.011215027491257187], [0.022482891528472233, 0.012987717815708108]],
    ),
]

coord = st.floats(-6.0, 6.0, allow_nan=False)
times = st.floats(1e-3, 1e3)


@pytest.mark.parametrize("x,y,a,lam,ref", REGULARISED_ORACLE)
def test_regularised_gamma_against_direct_integral(x, y, a, lam, ref):
    ref = np.array(ref)
    v = K.fundamental_solution(x, y, a, lam).gamma
    assert np.max(np.abs(v - ref)) <= 1e-11 * np.max(np.abs(ref))


@pytest.mark.parametrize("x,y,a,ref", ROTATING_ORACLE)
def test_gamma_against_period_sum(x, y, a, ref):
    ref = np.array(ref)
    v = K.fundamental_solution(x, y, a).gamma
    assert np.max(np.abs(v - ref)) <= 1e-10 * np.max(np.abs(ref))


@pytest.mark.parametrize("x,y,a,lam,ref", REGULARISED_ORACLE)
def test_direct_path_agrees(x, y, a, lam, ref):
    v, err = K.direct_regularized(x, y, a, lam)
    assert np.max(np.abs(v - np.array(ref))) <= 1e-10
    assert err < 1e-9


@given(coord, coord, times)
def test_trace_identity(x1, x2, t):
    x = np.array([x1, x2])
    if x @ x == 0:
        return
    H = K.hessian_tail(x, t)
    G = float(K.gauss(x, t))
    assert abs(np.trace(H) + G) <= 1e-12 * max(abs(G), float(np.max(np.abs(H))))


@given(coord, coord, times)
def test_heat_kernel_symmetric(x1, x2, t):
    k = K.heat_kernel([x1, x2], t).k
    np.testing.assert_allclose(k, k.T, atol=1e-15 * max(1.0, float(np.max(np.abs(k)))))


def test_hessian_tail_matches_quadrature_of_hessian():
    x, t = np.array([0.8, -0.3]), 0.4

    def hess(s):
        q = x @ x
        g = math.exp(-q / (4 * s)) / (4 * math.pi * s)
        return g * (np.outer(x, x) / (4 * s * s) - np.eye(2) / (2 * s))

    from scipy import integrate

    ref = np.array([[integrate.quad(lambda s: hess(s)[i, j], t, np.inf, epsabs=1e-14)[0] for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(K.hessian_tail(x, t), ref, atol=1e-12)


def test_heat_kernel_regular_at_origin():
    k = K.heat_kernel([0.0, 0.0], 0.5).k
    # G = 1/(4 pi t), H = -I/(8 pi t) at x = 0
    np.testing.assert_allclose(k, np.eye(2) / (8 * math.pi * 0.5), rtol=1e-14)


def test_columns_of_K_divergence_free_second_order():
    x0, t0 = np.array([0.7, -0.4]), 0.3

    def fd_div(h):
        out = np.zeros(2)
        for j in range(2):
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                out[j] += (K.heat_kernel(x0 + e, t0).k[i, j] - K.heat_kernel(x0 - e, t0).k[i, j]) / (2 * h)
        return float(np.max(np.abs(out)))

    e = [fd_div(h) for h in (1e-2, 5e-3, 2.5e-3)]
    assert all(1.9 < math.log2(e[i] / e[i + 1]) < 2.1 for i in range(2))


def test_heat_kernel_grad_matches_differences():
    x, t, h = np.array([0.5, 1.1]), 0.7, 1e-6
    g = K.heat_kernel_grad(x, t)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (K.heat_kernel(x + e, t).k - K.heat_kernel(x - e, t).k) / (2 * h)
        np.testing.assert_allclose(g[:, :, k], fd, atol=1e-9)


def test_leading_kernel():
    L = K.leading_kernel([2.0, 0.0], [0.0, 1.0])
    # x^perp = (0, 2), y^perp = (-1, 0)
    np.testing.assert_allclose(L, np.array([[0.0, 0.0], [-2.0, 0.0]]) / (16 * math.pi))
    with pytest.raises(K.SingularPointError):
        K.leading_kernel([0.0, 0.0], [1.0, 0.0])


@given(coord, coord, coord, coord)
def test_leading_kernel_is_linear_in_y(x1, x2, y1, y2):
    x = np.array([x1, x2])
    if x @ x < 1e-6:
        return
    y = np.array([y1, y2])
    g = K.leading_kernel_grad_y(x)
    np.testing.assert_allclose(K.leading_kernel(x, y), g @ y, atol=1e-12 * (1 + abs(y).sum()) / (x @ x))


def test_singular_points():
    with pytest.raises(K.SingularPointError):
        K.fundamental_solution([1.0, 0.0], [1.0, 0.0], 1.0)
    with pytest.raises(K.SingularPointError):
        K.hessian_tail(np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        K.gauss([1.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        K.fundamental_solution([3.0, 0.0], [1.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        K.gamma_batch([3.0, 0.0], [[1.0, 0.0]], 1.0, lam=-1.0)


def test_grad_y_matches_differences():
    x, y, a, h = np.array([5.0, 2.0]), np.array([0.5, -1.0]), 0.1, 1e-4
    g, _ = K.fundamental_solution_grad_y(x, y, a)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (K.fundamental_solution(x, y + e, a).gamma - K.fundamental_solution(x, y - e, a).gamma) / (2 * h)
        assert np.max(np.abs(fd - g[:, :, k])) <= 1e-6 * np.max(np.abs(g))


def test_parts_sum_to_gamma():
    x, y, a = (4.0, 1.0), (0.5, 0.5), 1.0
    parts = K.gamma_parts(x, y, a)
    total = sum(v for v, _ in parts.values())
    np.testing.assert_allclose(total, K.fundamental_solution(x, y, a).gamma, atol=1e-12)


def test_zero_lambda_is_limit_of_regularised():
    x, y, a = (4.0, 0.0), (1.0, 0.0), 1.0
    g0 = K.fundamental_solution(x, y, a).gamma
    d = [np.max(np.abs(K.fundamental_solution(x, y, a, lam).gamma - g0)) for lam in (1e-2, 1e-3, 1e-4)]
    assert d[0] > d[1] > d[2]
    assert d[2] < 1e-3


@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_rotation_covariance(phi, psi):
    # Gamma(O x, O y) = O Gamma(x, y) O^T for every fixed rotation O
    x, y, a = np.array([3.0, 0.5]), np.array([0.4, -0.8]), 0.5
    O = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    g = K.fundamental_solution(x, y, a, 0.3).gamma
    gr = K.fundamental_solution(O @ x, O @ y, a, 0.3).gamma
    np.testing.assert_allclose(gr, O @ g @ O.T, atol=1e-11)


def test_lemma32_bound_components():
    b = K.lemma32_bound([10.0, 0.0], [2.0, 0.0], 1.0, 0)
    assert b.components == pytest.approx((1 / 100, 10 * 1 / 1000, 4 / 100))
    b1 = K.lemma32_bound([10.0, 0.0], [2.0, 0.0], 1.0, 1)
    assert b1.components == pytest.approx((0.0, 1 / 1000, 2 / 100))
    with pytest.raises(ValueError):
        K.lemma32_bound([1.0, 0.0], [1.0, 0.0], 1.0, 0)
    with pytest.raises(ValueError):
        K.lemma32_bound([10.0, 0.0], [1.0, 0.0], 1.0, 2)


@pytest.mark.parametrize("a", [0.01, 0.1, 1.0])
def test_lemma32_ratio_bounded_small_sweep(a):
    ratios = []
    for nx in (2.0, 20.0, 100.0):
        for frac in (0.0, 0.45):
            x = nx * np.array([0.6, 0.8])
            y = frac * nx * np.array([0.0, 1.0])
            ratios += [K.lemma32_ratio(x, y, a, 0), K.lemma32_ratio(x, y, a, 1)]
    assert max(ratios) < 100.0


@pytest.mark.skipif(not K.HAVE_COMPILED, reason="compiled core not built")
@pytest.mark.parametrize("grad", [False, True])
def test_compiled_core_matches_reference(grad):
    from rotstokes import _kernelcore

    rng = np.random.default_rng(3)
    Y = rng.uniform(-2, 2, size=(40, 2))
    x = np.array([3.0, 1.0])
    t = np.geomspace(1e-3, 1e2, 11)
    ref = _kernel_py.time_integrand(t, x, Y, 0.3, 0.1, K.PART_ALL, grad)
    got = _kernelcore.time_integrand(t, x, Y, 0.3, 0.1, K.PART_ALL, grad)
    assert np.max(np.abs(ref - got)) <= 1e-13 * np.max(np.abs(ref))
    C = 12 if grad else 4
    W = rng.normal(size=(40, C, 3))
    ref = _kernel_py.time_integrand_contracted(t, x, Y, 0.3, 0.1, K.PART_ALL, grad, W)
    got = _kernelcore.time_integrand_contracted(t, x, Y, 0.3, 0.1, K.PART_ALL, grad, W)
    assert np.max(np.abs(ref - got)) <= 1e-13 * np.max(np.abs(ref))


@pytest.mark.skipif(not K.HAVE_COMPILED, reason="compiled core not built")
def test_gamma_batch_paths_agree():
    Y = np.array([[0.5, 0.0], [0.0, 1.0], [-1.0, -0.5]])
    a = K.gamma_batch([3.0, 1.0], Y, 0.2, compiled=True)[0]
    b = K.gamma_batch([3.0, 1.0], Y, 0.2, compiled=False)[0]
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)


def test_pure_python_switch(monkeypatch):
    import importlib

    monkeypatch.setenv("ROTSTOKES_PURE_PYTHON", "1")
    mod = importlib.reload(K)
    try:
        assert mod.HAVE_COMPILED is False
        v = mod.fundamental_solution(*REGULARISED_ORACLE[0][:4]).gamma
        np.testing.assert_allclose(v, REGULARISED_ORACLE[0][4], rtol=1e-10)
    finally:
        monkeypatch.delenv("ROTSTOKES_PURE_PYTHON")
        importlib.reload(K)


def test_expint_complex_real_axis():
    from scipy import special

    for p in (1, 2, 5):
        v = K.expint_complex(p, np.array([1.5 + 0j, 3.0 + 0j]))
        np.testing.assert_allclose(v.real, special.expn(p, [1.5, 3.0]), rtol=1e-12)
