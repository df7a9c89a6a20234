"""Heat-kernel algebra and the rotating Stokes fundamental solution.

``Gamma_a(x, y) = int_0^inf exp(-lam t) O(a t)^T K(O(a t) x - y, t) dt`` with
``K = G I + H`` and ``H(x, t) = int_t^inf grad^2 G(x, s) ds``.  With
``z = |x|^2/(4t)`` the tail Hessian has the closed form

    H = x (x) x phi2(z) / (16 pi t^2) - I phi1(z) / (8 pi t),

``phi1 = (1-e^-z)/z`` and ``phi2 = (1-(1+z)e^-z)/z^2``.  The two pieces are
the ``H11`` and ``H12`` parts of the kernel; ``G I`` is the ``G`` part.

Evaluation of ``Gamma_a`` splits the time axis at ``T``.  ``[0, T]`` goes to
adaptive Gauss-Kronrod.  Past ``T`` the map ``(theta, s) -> O(theta)^T t
K(O(theta) x - y, 1/s)`` is periodic in ``theta`` and entire in ``s = 1/t``;
a two-dimensional FFT on a circle ``|s| = 1/T`` gives its Fourier-Taylor
coefficients ``b[nu, n]``, and each term integrates in closed form:

    int_T^inf exp(-lam t + i nu a t) (T/t)^n dt/t = E_{n+1}((lam - i nu a) T).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _kernel_py
from ._kernel_py import PART_ALL, PART_G, PART_H11, PART_H12, phi_functions
from .fields import SpinParameter, outer, perp
from .quadrature import QuadratureBudgetError, adaptive_gk

try:  # compiled integrand; the NumPy version is the reference
    if os.environ.get("ROTSTOKES_PURE_PYTHON") == "1":
        raise ImportError("compiled core disabled by ROTSTOKES_PURE_PYTHON")
    from . import _kernelcore as _core

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build
    _core = None
    HAVE_COMPILED = False

__all__ = [
    "HeatKernelValue",
    "FundamentalSolutionValue",
    "Lemma32Bound",
    "SingularPointError",
    "gauss",
    "hessian_tail",
    "heat_kernel",
    "heat_kernel_grad",
    "leading_kernel",
    "leading_kernel_grad_y",
    "fundamental_solution",
    "fundamental_solution_grad_y",
    "gamma_batch",
    "gamma_parts",
    "lemma32_bound",
    "lemma32_ratio",
    "expint_complex",
    "HAVE_COMPILED",
    "PART_G",
    "PART_H11",
    "PART_H12",
    "PART_ALL",
]

_FOUR_PI = 4.0 * math.pi
_N_THETA = 32
_N_S = 24
_Z_CAP = 2.0


class SingularPointError(ValueError):
    """Raised at ``x = y`` (or ``x = 0`` where the leading kernel is needed)."""


@dataclass(frozen=True)
class HeatKernelValue:
    g: float
    h: np.ndarray
    k: np.ndarray


@dataclass(frozen=True)
class FundamentalSolutionValue:
    gamma: np.ndarray
    leading: np.ndarray
    remainder: np.ndarray
    quad_error: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.gamma)) and np.all(np.isfinite(self.leading))):
            raise ValueError("kernel values must be finite")


@dataclass(frozen=True)
class Lemma32Bound:
    m: int
    components: tuple

    @property
    def total(self) -> float:
        return float(sum(self.components))


def _vec(x):
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError("expected a 2-vector")
    return x


def _alpha_value(alpha) -> float:
    a = alpha.alpha if isinstance(alpha, SpinParameter) else float(alpha)
    SpinParameter(a)
    return a


def gauss(x, t: float) -> float:
    """``G(x, t) = exp(-|x|^2/(4t)) / (4 pi t)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)
    return np.exp(-q / (4.0 * t)) / (_FOUR_PI * t)


def hessian_tail(x, t: float) -> np.ndarray:
    """Closed form of ``int_t^inf grad^2 G(x, s) ds``."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)
    if np.any(q == 0):
        raise SingularPointError("hessian_tail is singular at x = 0")
    p1, p2, _ = phi_functions(q / (4.0 * t))
    eye = np.eye(2)
    return outer(x, x) * (p2 / (16.0 * math.pi * t * t))[..., None, None] - eye * (p1 / (8.0 * math.pi * t))[..., None, None]


def heat_kernel(x, t: float) -> HeatKernelValue:
    """``G``, ``H`` and ``K = G I + H`` at one point; ``K`` is regular at ``x = 0``."""
    x = _vec(x)
    if not t > 0:
        raise ValueError("t must be positive")
    g = float(gauss(x, t))
    q = float(x @ x)
    p1, p2, _ = phi_functions(np.array(q / (4.0 * t)))
    h = outer(x, x) * float(p2) / (16.0 * math.pi * t * t) - np.eye(2) * float(p1) / (8.0 * math.pi * t)
    return HeatKernelValue(g=g, h=h, k=g * np.eye(2) + h)


def heat_kernel_grad(x, t: float) -> np.ndarray:
    """``dK_ij/dx_k`` as an array indexed ``[i, j, k]``."""
    x = _vec(x)
    vals = _kernel_py.tk_values(np.zeros(1), np.array([1.0 / t]), np.zeros(2), -x[None, :], PART_ALL, grad=True)
    # Sampling at x = 0, y = -x gives X = x; the stored y-gradient is -t dK/dX.
    g = vals[0, 0, 4:].reshape(2, 2, 2) / t
    return -np.transpose(g, (1, 2, 0))


def leading_kernel(x, y) -> np.ndarray:
    """``L(x, y) = x^perp (x) y^perp / (4 pi |x|^2)``."""
    x, y = _vec(x), _vec(y)
    q = float(x @ x)
    if q == 0:
        raise SingularPointError("the leading kernel is singular at x = 0")
    return outer(perp(x), perp(y)) / (_FOUR_PI * q)


def leading_kernel_grad_y(x) -> np.ndarray:
    """``d L_ij / d y_k`` indexed ``[i, j, k]``; independent of ``y``."""
    x = _vec(x)
    q = float(x @ x)
    if q == 0:
        raise SingularPointError("the leading kernel is singular at x = 0")
    xp = perp(x)
    # y^perp = (-y2, y1): d y^perp_0 / d y_1 = -1, d y^perp_1 / d y_0 = 1
    dyp = np.array([[0.0, -1.0], [1.0, 0.0]])
    return xp[:, None, None] * dyp[None, :, :] / (_FOUR_PI * q)


def expint_complex(p, w):
    """``E_p(w) = int_1^inf exp(-w u) u^-p du`` for ``Re w >= 0``, ``|w| >= 1``.

    Modified Lentz evaluation of the standard continued fraction; ``p`` and
    ``w`` broadcast.
    """
    p, w = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(w, dtype=complex))
    b = w + p
    c = np.full_like(w, 1e300)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 400):
        an = -i * (p - 1 + i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h * np.exp(-w)


def _tail_exponentials(alpha, lam, T, nus, n_max):
    """``E[nu_index, n] = E_{n+1}((lam - i nu alpha) T)``; ``nan`` where it diverges."""
    nus = np.asarray(nus)
    out = np.empty((len(nus), n_max), dtype=complex)
    w = lam * T - 1j * nus * alpha * T
    osc = nus != 0
    w0 = lam * T
    out[osc, :] = expint_complex(np.arange(1, n_max + 1)[None, :], w[osc][:, None])
    for n in range(n_max):
        p = n + 1
        if w0 == 0.0:
            out[~osc, n] = 1.0 / n if n > 0 else np.nan
        else:
            out[~osc, n] = special.expn(p, w0)
    return out


def _default_T(x, Y, alpha):
    reach = float(np.hypot(*x)) + float(np.max(np.hypot(Y[:, 0], Y[:, 1])))
    return max(reach * reach / (4.0 * _Z_CAP), 8.0 / abs(alpha), 1.0)


def _tail_setup(alpha, lam, T):
    nth, ns = _N_THETA, _N_S
    theta = 2.0 * math.pi * np.arange(nth) / nth
    s = np.exp(2j * math.pi * np.arange(ns) / ns) / T
    th_g, s_g = np.meshgrid(theta, s, indexing="ij")
    nus = np.fft.fftfreq(nth, 1.0 / nth).astype(int)
    keep = np.abs(nus) < nth // 2
    E = _tail_exponentials(alpha, lam, T, nus[keep], ns)
    if lam == 0.0:
        E[nus[keep] == 0, 0] = 0.0  # the (0, 0) coefficient vanishes identically
    return th_g.ravel(), s_g.ravel(), keep, nus[keep], E


def _tail_sum(g, keep, nus, E):
    """Contract sampled ``g (n_theta, n_s, ...)`` into the tail integral and an error estimate."""
    nth, ns = _N_THETA, _N_S
    b = np.fft.fft2(g, axes=(0, 1)) / (nth * ns)
    b = b[keep]
    extra = "".join("abcdefgh"[: g.ndim - 2])
    total = np.real(np.einsum(f"vn{extra},vn->{extra}", b, E))
    inv_n = 1.0 / np.maximum(np.arange(ns), 1)
    mag = np.abs(b) * inv_n.reshape((1, ns) + (1,) * (g.ndim - 2))
    edge = np.sum(mag[:, -4:], axis=(0, 1)) + np.sum(mag[np.abs(nus) >= nth // 2 - 3], axis=(0, 1))
    return total, float(np.max(edge))


def _far_tail(x, Y, alpha, lam, T, parts, grad, weights=None, compiled=False, chunk=32):
    """Integral over ``[T, inf)`` by the Fourier-Taylor expansion; returns ``(values, err)``."""
    th, sg, keep, nus, E = _tail_setup(alpha, lam, T)
    nth, ns = _N_THETA, _N_S
    if weights is not None:
        fn = _core.tail_samples_contracted if compiled else _kernel_py.tail_samples_contracted
        g = fn(th, sg, x, Y, parts, grad, weights)
        return _tail_sum(g.reshape(nth, ns, -1), keep, nus, E)
    C = 12 if grad else 4
    total = np.empty((len(Y), C))
    err = 0.0
    for lo in range(0, len(Y), chunk):
        Yc = Y[lo : lo + chunk]
        g = _kernel_py.tk_values(th, sg, x, Yc, parts, grad).reshape(nth, ns, len(Yc), C)
        total[lo : lo + chunk], e = _tail_sum(g, keep, nus, E)
        err = max(err, e)
    return total, err


def _head_breakpoints(x, Y, alpha, T):
    d2 = np.sum((x[None, :] - Y) ** 2, axis=1)
    dmin = math.sqrt(float(np.min(d2)))
    pts = []
    t0 = max(dmin * dmin / 64.0, 1e-12 * T)
    while t0 < T:
        pts.append(t0)
        t0 *= 2.0
    period = 2.0 * math.pi / abs(alpha)
    n_per = int(T / period)
    if n_per <= 4000:
        pts.extend(period * np.arange(1, n_per + 1))
    return pts


def gamma_batch(
    x,
    Y,
    alpha,
    lam: float = 0.0,
    *,
    parts: int = PART_ALL,
    grad: bool = False,
    tol: float = 1e-12,
    budget: int = 1_000_000,
    compiled: bool | None = None,
    T: float | None = None,
    weights=None,
):
    """``Gamma`` (and optionally ``grad_y Gamma``) at one ``x`` for many ``y``.

    Returns ``(gamma (m, 2, 2), grad (m, 2, 2, 2) or None, error)``; the
    gradient is indexed ``[i, j, k]`` with ``k`` the ``y`` component.

    With ``weights`` of shape ``(m, C, P)`` (``C = 12`` if ``grad`` else 4;
    entry ``c`` is ``ij`` row-major, then ``d/dy_1``, then ``d/dy_2``) the
    sum over ``y`` is taken inside the time integral and ``(values (P,),
    error)`` is returned.  This is how volume potentials are evaluated.
    """
    x = _vec(x)
    a = _alpha_value(alpha)
    if lam < 0 or not np.isfinite(lam):
        raise ValueError("lambda must be finite and nonnegative")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if np.any(np.all(Y == x[None, :], axis=1)):
        raise SingularPointError("Gamma is singular at x = y")
    if T is None:
        T = _default_T(x, Y, a)
    use_c = HAVE_COMPILED if compiled is None else compiled
    if use_c and not HAVE_COMPILED:
        raise RuntimeError("compiled kernel core is not available")
    if weights is not None:
        weights = np.ascontiguousarray(weights, dtype=float)
        fn_w = _core.time_integrand_contracted if use_c else _kernel_py.time_integrand_contracted

        def f(t):
            return fn_w(t, x, Y, a, lam, parts, grad, weights)

    else:
        fn = _core.time_integrand if use_c else _kernel_py.time_integrand

        def f(t):
            return fn(t, x, Y, a, lam, parts, grad)

    try:
        head, herr, _ = adaptive_gk(f, 0.0, T, tol=tol, budget=budget, breakpoints=_head_breakpoints(x, Y, a, T))
    except QuadratureBudgetError as exc:
        raise QuadratureBudgetError(str(exc), exc.value, exc.error, exc.subdivisions) from None
    if weights is not None:
        tail, terr = _far_tail(x, Y, a, lam, T, parts, grad, weights, use_c)
        return head + tail, herr + terr
    C = 12 if grad else 4
    head = head.reshape(len(Y), C)
    tail, terr = _far_tail(x, Y, a, lam, T, parts, grad)
    vals = head + tail
    gam = vals[:, :4].reshape(-1, 2, 2)
    g = None
    if grad:
        g = np.stack([vals[:, 4:8].reshape(-1, 2, 2), vals[:, 8:12].reshape(-1, 2, 2)], axis=-1)
    return gam, g, herr + terr


def fundamental_solution(x, y, alpha, lam: float = 0.0, *, tol: float = 1e-12, parts: int = PART_ALL) -> FundamentalSolutionValue:
    """``Gamma_a(x, y)`` (``lam = 0``) or the regularised ``Gamma_a^lam``."""
    x, y = _vec(x), _vec(y)
    if np.array_equal(x, y):
        raise SingularPointError("Gamma is singular at x = y")
    if lam == 0 and not np.any(x):
        raise SingularPointError("the leading kernel needs x != 0")
    gam, _, err = gamma_batch(x, y[None, :], alpha, lam, parts=parts, tol=tol)
    lead = leading_kernel(x, y) if np.any(x) else np.zeros((2, 2))
    return FundamentalSolutionValue(gamma=gam[0], leading=lead, remainder=gam[0] - lead, quad_error=err)


def fundamental_solution_grad_y(x, y, alpha, lam: float = 0.0, *, tol: float = 1e-12):
    """``(grad_y Gamma [i, j, k], error)`` by differentiating the integrand."""
    x, y = _vec(x), _vec(y)
    _, g, err = gamma_batch(x, y[None, :], alpha, lam, grad=True, tol=tol)
    return g[0], err


def gamma_parts(x, y, alpha, *, tol: float = 1e-12) -> dict:
    """The three pieces ``Gamma0`` (Gauss part), ``Gamma11`` and ``Gamma12`` (tail Hessian parts)."""
    x, y = _vec(x), _vec(y)
    out = {}
    for name, mask in (("G0", PART_G), ("G11", PART_H11), ("G12", PART_H12)):
        gam, _, err = gamma_batch(x, y[None, :], alpha, 0.0, parts=mask, tol=tol)
        out[name] = (gam[0], err)
    return out


def direct_regularized(x, y, alpha, lam: float, *, tol: float = 1e-12):
    """``Gamma_a^lam`` by plain adaptive quadrature on a truncated axis (``lam > 0``)."""
    if not lam > 0:
        raise ValueError("the direct path needs lambda > 0")
    x, y = _vec(x), _vec(y)
    a = _alpha_value(alpha)
    Y = y[None, :]
    T = 50.0 / lam + 100.0
    f = lambda t: _kernel_py.time_integrand(t, x, Y, a, lam, PART_ALL, False)  # noqa: E731
    val, err, _ = adaptive_gk(f, 0.0, T, tol=tol, breakpoints=_head_breakpoints(x, Y, a, T))
    # |integrand| <= e^{-lam t} / (4 pi t) beyond T
    trunc = float(special.exp1(lam * T)) / (2.0 * math.pi)
    return val.reshape(2, 2), err + trunc


def lemma32_bound(x, y, alpha, m: int) -> Lemma32Bound:
    """The three terms bounding ``|grad_y^m (Gamma - L)|`` for ``|x| > 2|y|``."""
    x, y = _vec(x), _vec(y)
    a = abs(_alpha_value(alpha))
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    rx, ry = float(np.hypot(*x)), float(np.hypot(*y))
    if not rx > 2.0 * ry:
        raise ValueError("the estimate needs |x| > 2|y|")
    t1 = min(1.0 / (a * rx * rx), 1.0 / (math.sqrt(a) * rx)) if m == 0 else 0.0
    t2 = rx ** (1 - m) * min(1.0 / (a * rx**3), 1.0 / rx)
    t3 = ry ** (2 - m) / rx**2
    return Lemma32Bound(m=m, components=(t1, t2, t3))


def lemma32_ratio(x, y, alpha, m: int, *, tol: float = 1e-12) -> float:
    """Max-entry ``|grad_y^m (Gamma - L)|`` over the bound of :func:`lemma32_bound`."""
    bound = lemma32_bound(x, y, alpha, m)
    x, y = _vec(x), _vec(y)
    if m == 0:
        val = fundamental_solution(x, y, alpha, tol=tol)
        num = float(np.max(np.abs(val.remainder)))
    else:
        g, _ = fundamental_solution_grad_y(x, y, alpha, tol=tol)
        num = float(np.max(np.abs(g - leading_kernel_grad_y(x))))
    return num / bound.total
