"""Oscillatory time integrals with a Gaussian factor.

Two families are evaluated:

* single: ``I1(m, r, a) = int_0^inf exp(i a t) exp(-r^2/t) t^(-m) dt``
* double: ``I2(m, r, a) = int_0^inf exp(i a t) int_t^inf exp(-r^2/s) s^(-m-1) ds dt``

For ``a != 0`` the t-axis is split at ``l = r^(2m/(m+1)) |a|^(-1/(m+1))``.
The piece on ``[0, l]`` is integrated directly.  On ``[l, inf)`` one
integration by parts moves the oscillation onto a boundary term and an
integrand that decays one power faster; that remaining integral is then
taken along the ray ``t = l + i s / a`` where ``exp(i a t)`` becomes the
decaying ``exp(i a l) exp(-s)``.  The integrands are analytic in the right
half plane with ``|exp(-r^2/t)| <= 1`` there, so the rotation is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .fields import rotation
from .quadrature import QuadResult, QuadratureBudgetError, adaptive_gk

__all__ = [
    "OscIntegralSpec",
    "split_point",
    "osc_time_integral",
    "osc_double_integral",
    "lemma21_bound",
    "gaussian_difference_integral",
    "closed_form_static",
]

DEFAULT_TOL = 1e-12
DEFAULT_BUDGET = 1_000_000


@dataclass(frozen=True)
class OscIntegralSpec:
    m: float
    r: float
    alpha: float = 0.0
    kind: str = "single"

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be positive")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.kind not in ("single", "double"):
            raise ValueError("kind must be 'single' or 'double'")
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")


def split_point(m: float, r: float, alpha: float) -> float:
    """``l = r^(2m/(m+1)) |alpha|^(-1/(m+1))``."""
    if alpha == 0:
        raise ValueError("split point needs alpha != 0")
    return r ** (2.0 * m / (m + 1.0)) * abs(alpha) ** (-1.0 / (m + 1.0))


def closed_form_static(m: float, r: float) -> float:
    """``Gamma(m-1) / r^(2(m-1))``, the common value of both families at alpha = 0."""
    if m <= 1:
        raise ValueError("closed form needs m > 1")
    return math.gamma(m - 1.0) / r ** (2.0 * (m - 1.0))


def lemma21_bound(m: float, r: float, alpha: float) -> float:
    """``min{1/(|a| r^(2m)), 1/(|a|^(1/(m+1)) r^(2m^2/(m+1)))}``."""
    if alpha == 0:
        raise ValueError("the oscillatory bound is defined for alpha != 0 only")
    if m <= 0 or r <= 0:
        raise ValueError("m and r must be positive")
    a = abs(alpha)
    return min(1.0 / (a * r ** (2 * m)), 1.0 / (a ** (1.0 / (m + 1)) * r ** (2 * m * m / (m + 1))))


def _gauss_power(m, r):
    r2 = r * r

    def h(t):
        return np.exp(-r2 / t) * t ** (-m)

    return h


def _inner_tail(m, r, t):
    """``int_t^inf exp(-r^2/s) s^(-m-1) ds = r^(-2m) gamma_lower(m, r^2/t)``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        z = np.where(t > 0, r * r / np.where(t > 0, t, 1.0), np.inf)
    return special.gamma(m) * special.gammainc(m, z) / r ** (2.0 * m)


def _head(f, l, tol, budget):
    """Direct integral over ``[0, l]``; the integrands vanish to all orders at 0."""
    edges = [0.0] + [l * 2.0**-k for k in range(12, 0, -1)] + [l]
    val, err, n = adaptive_gk(f, 0.0, l, tol=tol, budget=budget, breakpoints=edges[1:-1])
    return complex(val[0]), err, n


def _rotated_tail(q, l, alpha, envelope, tol, budget):
    """``int_l^inf exp(i a t) q(t) dt`` along ``t = l + i s / a``.

    ``envelope`` bounds ``|q|`` on the ray; the ray is cut where
    ``exp(-s) * envelope / |a|`` drops below ``tol / 10``.
    """
    a = float(alpha)
    s_max = max(40.0, math.log(max(envelope, 1e-300) / (abs(a) * tol * 0.1)) + 1.0)
    trunc = envelope * math.exp(-s_max) / abs(a)

    def g(s):
        return (np.exp(-s) * q(l + 1j * s / a))[:, None]

    edges = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
    val, err, n = adaptive_gk(g, 0.0, s_max, tol=tol * abs(a), budget=budget, breakpoints=edges)
    factor = 1j / a * np.exp(1j * a * l)
    return complex(factor * val[0]), err / abs(a) + trunc, n


def _static_tail(h, l, m, tol, budget):
    """``int_l^inf h(t) dt`` for ``h ~ t^-m`` via ``t = l w^(-1/(m-1))``."""
    q = 1.0 / (m - 1.0)

    def g(w):
        w = np.maximum(w, 1e-300)
        t = l * w ** (-q)
        return (h(t) * q * l * w ** (-q - 1.0))[:, None]

    edges = [2.0**-k for k in range(20, 0, -1)]
    val, err, n = adaptive_gk(g, 0.0, 1.0, tol=tol, budget=budget, breakpoints=edges)
    return complex(val[0]), err, n


def _finish(value, err, n, tol, budget):
    if n > budget:
        raise QuadratureBudgetError("panel budget exhausted", value, err, n)
    return QuadResult(complex(value), float(err), int(n))


def osc_time_integral(spec: OscIntegralSpec, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> QuadResult:
    """Single family ``int_0^inf exp(i a t) exp(-r^2/t) t^(-m) dt``."""
    if spec.kind != "single":
        raise ValueError("osc_time_integral evaluates the single family")
    m, r, a = spec.m, spec.r, spec.alpha
    h = _gauss_power(m, r)
    if a == 0.0:
        if m <= 1:
            raise ValueError("the static single integral diverges for m <= 1")
        l = r * r
        v1, e1, n1 = _head(lambda t: h(t)[:, None], l, tol / 2, budget)
        v2, e2, n2 = _static_tail(h, l, m, tol / 2, budget)
        return _finish(v1 + v2, e1 + e2, n1 + n2, tol, budget)

    l = split_point(m, r, a)
    r2 = r * r
    v1, e1, n1 = _head(lambda t: (np.exp(1j * a * t) * h(t))[:, None], l, tol / 3, budget)
    boundary = -np.exp(1j * a * l) * h(l) / (1j * a)

    def dh(t):
        return np.exp(-r2 / t) * (r2 * t ** (-m - 2.0) - m * t ** (-m - 1.0))

    env = r2 * l ** (-m - 2.0) + m * l ** (-m - 1.0)
    v2, e2, n2 = _rotated_tail(dh, l, a, env, tol * abs(a) / 3, budget)
    value = v1 + boundary - v2 / (1j * a)
    err = e1 + e2 / abs(a)
    return _finish(value, err, n1 + n2, tol, budget)


def osc_double_integral(spec: OscIntegralSpec, tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET) -> QuadResult:
    """Double family; the inner integral is the lower incomplete gamma function."""
    if spec.kind != "double":
        raise ValueError("osc_double_integral evaluates the double family")
    m, r, a = spec.m, spec.r, spec.alpha
    if a == 0.0:
        if m <= 1:
            raise ValueError("the static double integral diverges for m <= 1")
        l = r * r
        hh = lambda t: _inner_tail(m, r, t)  # noqa: E731
        v1, e1, n1 = _head(lambda t: hh(t)[:, None], l, tol / 2, budget)
        v2, e2, n2 = _static_tail(hh, l, m, tol / 2, budget)
        return _finish(v1 + v2, e1 + e2, n1 + n2, tol, budget)

    l = split_point(m, r, a)
    r2 = r * r
    v1, e1, n1 = _head(lambda t: (np.exp(1j * a * t) * _inner_tail(m, r, t))[:, None], l, tol / 3, budget)
    boundary = -np.exp(1j * a * l) * _inner_tail(m, r, l) / (1j * a)

    def q(t):
        return np.exp(-r2 / t) * t ** (-m - 1.0)

    env = l ** (-m - 1.0)
    v2, e2, n2 = _rotated_tail(q, l, a, env, tol * abs(a) / 3, budget)
    # d/dt of the inner integral is -exp(-r^2/t) t^(-m-1).
    value = v1 + boundary + v2 / (1j * a)
    err = e1 + e2 / abs(a)
    return _finish(value, err, n1 + n2, tol, budget)


def _mean_abs_cos_shift(amp, shift):
    """Average over a period of ``|amp cos(psi) - shift|`` for ``amp > shift >= 0``."""
    if amp <= 0:
        return abs(shift)
    c = min(shift / amp, 1.0)
    return amp / math.pi * (2.0 * math.sqrt(1.0 - c * c) + c * (math.pi - 2.0 * math.acos(c)))


def gaussian_difference_integral(x, y, alpha: float, m: float, kind: str = "single", tol: float = 1e-10) -> QuadResult:
    """Gaussian-difference integral in the rotating frame.

    single: ``int_0^inf |exp(-|O(a t)x - y|^2/4t) - exp(-|x|^2/4t)| t^(-m) dt``
    double: ``int_0^inf int_t^inf |exp(-|O(a t)x - y|^2/4s) - exp(-|x|^2/4s)| s^(-m-1) ds dt``

    Requires ``|x| > 2|y|`` and ``m > 1``.  Past a cut ``T`` the integrand is
    replaced by its leading large-t term averaged over a rotation period;
    the reported error includes a bound for that replacement.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = float(np.hypot(*x)), float(np.hypot(*y))
    if not nx > 2.0 * ny:
        raise ValueError("precondition |x| > 2|y| violated")
    if not m > 1:
        raise ValueError("m must exceed 1")
    if kind not in ("single", "double"):
        raise ValueError("kind must be 'single' or 'double'")
    if ny == 0.0:
        return QuadResult(0.0, 0.0, 0)
    b = nx * nx / 4.0

    def a_of(t):
        rot = rotation(alpha * t)
        z = np.einsum("nij,j->ni", rot, x) - y
        return np.sum(z * z, axis=1) / 4.0

    if kind == "single":

        def f(t):
            return (np.abs(np.exp(-a_of(t) / t) - np.exp(-b / t)) * t ** (-m))[:, None]

    else:

        def f(t):
            a = a_of(t)
            ia = special.gamma(m) * special.gammainc(m, a / t) / a**m
            ib = special.gamma(m) * special.gammainc(m, b / t) / b**m
            return np.abs(ia - ib)[:, None]

    span = (nx + ny) ** 2
    T = 400.0 * span
    if alpha != 0:
        T = max(T, 400.0 * math.pi / abs(alpha))
    period = 2.0 * math.pi / abs(alpha) if alpha != 0 else T
    n_init = int(min(max(T / period * 2, 1), 20000))
    edges = np.linspace(0.0, T, n_init + 1)[1:-1]
    val, err, n = adaptive_gk(f, 0.0, T, tol=tol, rel_tol=tol, budget=DEFAULT_BUDGET, breakpoints=edges)
    # Leading term: |b - a(t)| / t^(m+1) (single) or / ((m+1) t^(m+1)) (double).
    amp, shift = 2.0 * nx * ny / 4.0, ny * ny / 4.0
    mean = _mean_abs_cos_shift(amp, shift) if alpha != 0 else abs(amp - shift)
    scale = 1.0 if kind == "single" else 1.0 / (m + 1.0)
    tail = scale * mean * T ** (-m) / m
    # Second-order remainder plus the period-averaging error.
    corr = scale * (amp + shift) * (span / T) * T ** (-m) / m
    if alpha != 0:
        corr += scale * (amp + shift) * period * T ** (-m - 1.0)
    return QuadResult(float(val[0]) + tail, float(err + corr), int(n))
