"""Volume potentials of the rotating Stokes system on the whole plane.

``u = L[f]`` solves ``-Lap u - a (x^perp . grad u - u^perp) + grad p = f``,
``div u = 0``.  Far from the data ``u ~ c x^perp / (4 pi |x|^2)`` with
``c = c[f] = int y^perp . f`` (or ``c~[F] = int (F12 - F21)`` when
``f = div F``); everything else is the remainder ``R[f]``.

Integrals over the data use a polar product rule: Gauss-Legendre panels in
``r`` and the trapezoid rule in ``theta``.  The kernel is summed against the
quadrature weights inside its time integral (see ``kernel.gamma_batch``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .fields import _smoothstep7, perp
from .gridio import GridData
from .kernel import gamma_batch
from .quadrature import gauss_legendre

__all__ = [
    "PolarRule",
    "CompactForcing",
    "TensorForcing",
    "PotentialResult",
    "ConvergenceError",
    "coefficient_c",
    "coefficient_c_tilde",
    "volume_potential",
    "divergence_form_potential",
    "pressure_potential",
    "stokes_residual",
    "forcing_from_grid",
]

_FOUR_PI = 4.0 * math.pi


class ConvergenceError(RuntimeError):
    """An expanding-radius sequence failed to settle."""


@dataclass(frozen=True)
class PolarRule:
    """Product rule on the annulus ``r0 <= |y| <= r1``."""

    r0: float
    r1: float
    n_r: int = 16
    n_theta: int = 64
    panel_width: float = 1.0

    def __post_init__(self):
        if not (0 <= self.r0 < self.r1) or self.n_r < 2 or self.n_theta < 4:
            raise ValueError("invalid polar rule")

    def nodes(self):
        """``(points (Q, 2), weights (Q,), radii (Q,))``."""
        n_pan = max(1, int(math.ceil((self.r1 - self.r0) / self.panel_width)))
        edges = np.linspace(self.r0, self.r1, n_pan + 1)
        rs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(self.n_r, a, b)
            rs.append(x)
            ws.append(w)
        r = np.concatenate(rs)
        wr = np.concatenate(ws) * r
        th = 2.0 * math.pi * np.arange(self.n_theta) / self.n_theta
        R, TH = np.meshgrid(r, th, indexing="ij")
        pts = np.stack([R * np.cos(TH), R * np.sin(TH)], axis=-1).reshape(-1, 2)
        w = np.repeat(wr * (2.0 * math.pi / self.n_theta), self.n_theta)
        return pts, w, R.ravel()


def _check_support(fn, R, scale):
    th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    ring = np.stack([np.cos(th), np.sin(th)], axis=-1)
    for fac in (1.0 + 1e-9, 1.5, 3.0):
        vals = np.asarray(fn(ring * R * fac))
        if np.max(np.abs(vals)) > 1e-12 * max(scale, 1e-300):
            raise ValueError(f"forcing does not vanish outside its declared support radius {R}")


@dataclass(frozen=True)
class CompactForcing:
    """Vector forcing ``f`` supported in the closed disk of radius ``R``."""

    f: Callable
    R: float
    n_r: int = 16
    n_theta: int = 64
    panel_width: float = 1.0
    check: bool = True

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("support radius must be positive")
        if self.check:
            pts, _, _ = self.rule().nodes()
            scale = float(np.max(np.abs(self.f(pts)))) if len(pts) else 0.0
            if scale > 0:
                _check_support(self.f, self.R, scale)

    def rule(self) -> PolarRule:
        return PolarRule(0.0, self.R, self.n_r, self.n_theta, self.panel_width)

    def samples(self):
        pts, w, r = self.rule().nodes()
        return pts, w, r, np.asarray(self.f(pts), dtype=float)

    def l1_norm(self) -> float:
        _, w, _, fv = self.samples()
        return float(np.sum(w * np.hypot(fv[:, 0], fv[:, 1])))

    def moment_l1(self, s: float) -> float:
        """``|| |y|^s f ||_{L1}``."""
        _, w, r, fv = self.samples()
        return float(np.sum(w * r**s * np.hypot(fv[:, 0], fv[:, 1])))

    def l2_norm(self) -> float:
        _, w, _, fv = self.samples()
        return float(math.sqrt(np.sum(w * np.sum(fv**2, axis=1))))

    @property
    def resolution(self) -> dict:
        return {"n_r": self.n_r, "n_theta": self.n_theta, "panel_width": self.panel_width}


def _fd_divergence(F, x, h):
    """Fourth-order central differences of ``(div F)_i = d_j F_ij``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (2,))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        d = (-F(x + 2 * e) + 8 * F(x + e) - 8 * F(x - e) + F(x - 2 * e)) / (12.0 * h)
        out += d[..., :, j]
    return out


@dataclass(frozen=True)
class TensorForcing:
    """Matrix forcing ``F`` with ``f = div F``.

    ``support_radius`` declares compact support.  Otherwise ``quad_radius``
    is where the quadrature stops and ``gamma`` is the decay exponent of the
    envelope ``|F| <= C (1+|y|)^(-2-gamma)`` used for truncation estimates.
    """

    F: Callable
    gamma: float = 0.0
    support_radius: float | None = None
    quad_radius: float | None = None
    div: Callable | None = None
    antisym_integrable: bool = True
    n_r: int = 16
    n_theta: int = 64
    panel_width: float = 1.0
    fd_step: float = 1e-3

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError("decay exponent must lie in [0, 1)")
        if self.support_radius is None and self.quad_radius is None:
            raise ValueError("give support_radius (compact) or quad_radius (truncation)")
        if self.gamma == 0.0 and not self.antisym_integrable:
            raise ValueError("gamma = 0 needs an integrable antisymmetric part")

    @property
    def compact(self) -> bool:
        return self.support_radius is not None

    @property
    def radius(self) -> float:
        return float(self.support_radius if self.compact else self.quad_radius)

    def rule(self, r0: float = 0.0, r1: float | None = None) -> PolarRule:
        return PolarRule(r0, self.radius if r1 is None else r1, self.n_r, self.n_theta, self.panel_width)

    def divergence(self, x):
        if self.div is not None:
            return np.asarray(self.div(np.asarray(x, dtype=float)), dtype=float)
        return _fd_divergence(self.F, x, self.fd_step)

    def samples(self):
        pts, w, r = self.rule().nodes()
        return pts, w, r, np.asarray(self.F(pts), dtype=float)

    def linf_weighted(self, s: float, r_min: float = 0.0) -> float:
        pts, _, r, Fv = self.samples()
        sel = r >= r_min
        if not np.any(sel):
            return 0.0
        mag = np.sqrt(np.sum(Fv[sel] ** 2, axis=(1, 2)))
        return float(np.max((1.0 + r[sel]) ** s * mag))

    def l2_norm(self) -> float:
        _, w, _, Fv = self.samples()
        return float(math.sqrt(np.sum(w * np.sum(Fv**2, axis=(1, 2)))))

    def antisym_l1(self) -> float:
        _, w, _, Fv = self.samples()
        return float(np.sum(w * np.abs(Fv[:, 0, 1] - Fv[:, 1, 0])))

    def norms(self) -> dict:
        return {
            "linf_2_plus_gamma": self.linf_weighted(2.0 + self.gamma),
            "l2": self.l2_norm(),
            "antisym_l1": self.antisym_l1(),
        }

    def as_compact_forcing(self) -> CompactForcing:
        if not self.compact:
            raise ValueError("only compactly supported F gives a compact f")
        return CompactForcing(self.divergence, float(self.support_radius), self.n_r, self.n_theta, self.panel_width, check=False)


def coefficient_c(f: CompactForcing) -> float:
    """``c[f] = int y^perp . f(y) dy``."""
    pts, w, _, fv = f.samples()
    return float(np.sum(w * np.sum(perp(pts) * fv, axis=1)))


def coefficient_c_tilde(F: TensorForcing, tol: float = 1e-10, max_doublings: int = 80) -> float:
    """``c~[F] = int (F12 - F21) dy`` over expanding balls.

    Compact ``F`` is integrated over its support.  Otherwise the ball radius
    doubles from ``quad_radius / 8`` until successive values differ by less
    than ``tol``.
    """

    def annulus(r0, r1):
        pts, w, _ = F.rule(r0, r1).nodes()
        Fv = np.asarray(F.F(pts), dtype=float)
        return float(np.sum(w * (Fv[:, 0, 1] - Fv[:, 1, 0])))

    if F.compact:
        return annulus(0.0, F.radius)
    r = max(F.radius / 8.0, 1.0)
    total = annulus(0.0, r)
    for _ in range(max_doublings):
        piece = annulus(r, 2.0 * r)
        total += piece
        r *= 2.0
        if abs(piece) < tol:
            return total
    raise ConvergenceError(f"c~[F] did not settle within radius {r:.3g}")


@dataclass
class PotentialResult:
    """A volume potential together with its far-field split."""

    u: Callable
    coefficient: float
    gamma: float
    remainder_report: dict = field(default_factory=dict)
    reference_bound: float = float("nan")
    bound_terms: dict = field(default_factory=dict)
    resolution: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    quad_error: dict = field(default_factory=dict)

    def leading(self, x):
        x = np.asarray(x, dtype=float)
        q = np.sum(x * x, axis=-1)
        return self.coefficient * perp(x) / (_FOUR_PI * q)[..., None]

    def remainder(self, x):
        return self.u(x) - self.leading(x)


def _directions(n):
    th = 2.0 * math.pi * (np.arange(n) + 0.5) / n
    return np.stack([np.cos(th), np.sin(th)], axis=-1)


def _report(result: PotentialResult, radii, n_dir, support_radius):
    rep = {}
    for rad in radii:
        if rad < 2.0 * support_radius:
            result.flags.append(f"radius {rad:g} lies inside 2R; reported but outside the estimate's range")
        xs = rad * _directions(n_dir)
        rem = result.remainder(xs)
        rep[float(rad)] = float(np.max(rad ** (1.0 + result.gamma) * np.hypot(rem[:, 0], rem[:, 1])))
    result.remainder_report = rep


@dataclass(frozen=True)
class _NearField:
    """Singular correction around an evaluation point inside the data.

    With ``chi`` equal to 1 on ``|y - x| <= rho/2`` and 0 past ``rho`` the
    integral splits into ``(1 - chi) * data`` on the global rule, which no
    longer sees the singularity, and ``chi * data`` on a polar rule centred
    at ``x`` whose Jacobian cancels it.
    """

    source: Callable
    weights: Callable
    panel_width: float
    n_theta_global: int
    support: float | None
    n_r: int = 12
    n_theta: int = 48

    def radius(self, x) -> float:
        return max(2.0 * self.panel_width, 16.0 * math.pi * float(np.hypot(*x)) / self.n_theta_global)

    def applies(self, x) -> bool:
        # outside compact data the global rule is already smooth in y
        return self.support is None or float(np.hypot(*x)) < self.support

    def split(self, x, Y):
        """``(far mask, 1 - chi on far nodes, local nodes, local weights chi * w)``."""
        rho = self.radius(x)
        chi = _chi(np.hypot(*(Y - x).T), rho)
        far = chi < 1.0
        lp, lw, lr = PolarRule(0.0, rho, self.n_r, self.n_theta, rho / 4.0).nodes()
        return far, 1.0 - chi[far], x + lp, lw * _chi(lr, rho)


def _chi(d, rho):
    h = rho / 2.0
    return 1.0 - _smoothstep7(np.clip((np.asarray(d, dtype=float) - h) / h, 0.0, 1.0))


def _make_potential(Y, W, alpha, grad, tol, err_log, near: _NearField | None = None):
    def u(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        out = np.empty_like(flat)
        for n, xi in enumerate(flat):
            Yx, Wx = Y, W
            if near is not None and near.applies(xi):
                far, keep, ly, lw = near.split(xi, Y)
                Wl = near.weights(lw, np.asarray(near.source(ly), dtype=float))
                Yx = np.concatenate([Y[far], ly])
                Wx = np.concatenate([W[far] * keep[:, None, None], Wl])
            d2 = np.min(np.sum((Yx - xi) ** 2, axis=1))
            if d2 == 0.0:
                raise ValueError("evaluation point coincides with a quadrature node")
            val, err = gamma_batch(xi, Yx, alpha, grad=grad, tol=tol, weights=Wx)
            out[n] = val
            err_log[tuple(xi)] = err
        return out.reshape(x.shape)

    return u


def _volume_weights(w, fv):
    # W[q, 2i+j, i] = w_q f_j(y_q)
    W = np.zeros((len(w), 4, 2))
    for i in range(2):
        for j in range(2):
            W[:, 2 * i + j, i] = w * fv[:, j]
    return W


def _divform_weights(w, Fv):
    # u_i = -sum_{jk} d_{y_k} Gamma_ij F_jk  ->  W[q, 4 + 4k + 2i + j, i]
    W = np.zeros((len(w), 12, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                W[:, 4 + 4 * k + 2 * i + j, i] = -w * Fv[:, j, k]
    return W


def volume_potential(
    f: CompactForcing,
    alpha,
    *,
    gamma: float = 0.0,
    radii=None,
    n_dir: int = 8,
    tol: float = 1e-12,
    near_field: bool = True,
) -> PotentialResult:
    """``u(x) = int Gamma_a(x, y) f(y) dy`` for compactly supported ``f``.

    With ``near_field`` evaluation points within reach of the data get the
    local singular correction.
    """
    pts, w, _, fv = f.samples()
    keep = np.any(fv != 0.0, axis=1)
    pts, w, fv = pts[keep], w[keep], fv[keep]
    W = _volume_weights(w, fv)
    a = abs(alpha.alpha if hasattr(alpha, "alpha") else float(alpha))
    errs: dict = {}
    near = _NearField(f.f, _volume_weights, f.panel_width, f.n_theta, f.R) if near_field else None
    res = PotentialResult(
        u=_make_potential(pts, W, alpha, False, tol, errs, near),
        coefficient=coefficient_c(f),
        gamma=gamma,
        resolution={**f.resolution, "nodes": int(len(pts))},
        quad_error=errs,
    )
    t1 = a ** (-(1.0 + gamma) / 2.0) * f.l1_norm()
    t2 = f.moment_l1(1.0 + gamma)
    res.bound_terms = {"alpha_l1": t1, "moment_l1": t2}
    res.reference_bound = t1 + t2
    if radii is None:
        radii = (4.0 * f.R, 8.0 * f.R, 16.0 * f.R)
    if radii:
        _report(res, radii, n_dir, f.R)
    return res


def _divform_bound_terms(F: TensorForcing, alpha: float, R: float, n_rho: int = 24) -> dict:
    """The four terms of the divergence-form remainder estimate at base radius ``R``."""
    g = F.gamma
    pts, w, r, Fv = F.samples()
    mag = np.sqrt(np.sum(Fv**2, axis=(1, 2)))
    ymag = r * mag
    anti = Fv[:, 0, 1] - Fv[:, 1, 0]
    t1 = F.linf_weighted(2.0 + g, r_min=R)
    rho = 2.0 * R * 2.0 ** (np.arange(n_rho) / 2.0)
    t2 = t3 = t4 = 0.0
    for p in rho:
        inner = r < p / 2.0
        l1y = float(np.sum(w[inner] * ymag[inner]))
        l1 = float(np.sum(w[inner] * mag[inner]))
        outer_anti = abs(float(np.sum(w[~inner] * anti[~inner])))
        t2 = max(t2, p ** (-1.0 + g) * l1y)
        t3 = max(t3, min(1.0 / (alpha * p ** (2.0 - g)), p**g) * l1)
        t4 = max(t4, p**g * outer_anti)
    return {"envelope": t1, "moment": t2, "mass": t3, "antisym_tail": t4}


def divergence_form_potential(
    F: TensorForcing,
    alpha,
    *,
    radii=None,
    n_dir: int = 8,
    tol: float = 1e-12,
    base_radius: float = 1.0,
    near_field: bool = True,
) -> PotentialResult:
    """``u(x) = -int grad_y Gamma_a(x, y) F(y) dy``.

    Non-compact ``F`` is integrated up to ``quad_radius``; the neglected part
    is bounded with the declared envelope and reported as ``truncation``.
    """
    pts, w, r, Fv = F.samples()
    keep = np.any(Fv.reshape(len(pts), 4) != 0.0, axis=1)
    pts, w, r, Fv = pts[keep], w[keep], r[keep], Fv[keep]
    W = _divform_weights(w, Fv)
    a = abs(alpha.alpha if hasattr(alpha, "alpha") else float(alpha))
    errs: dict = {}
    near = None
    if near_field:
        near = _NearField(F.F, _divform_weights, F.panel_width, F.n_theta, F.support_radius)
    res = PotentialResult(
        u=_make_potential(pts, W, alpha, True, tol, errs, near),
        coefficient=coefficient_c_tilde(F),
        gamma=F.gamma,
        resolution={"n_r": F.n_r, "n_theta": F.n_theta, "panel_width": F.panel_width, "nodes": int(len(pts))},
        quad_error=errs,
    )
    res.bound_terms = _divform_bound_terms(F, a, base_radius)
    res.reference_bound = float(sum(res.bound_terms.values()))
    if not F.compact:  # reported separately; not part of the estimate
        env = F.linf_weighted(2.0 + F.gamma, r_min=F.radius - F.panel_width)
        # |grad_y Gamma(x, y)| <~ 1/|y| for |y| >> |x|, so the neglected shell
        # contributes at most env * int_R^inf r^(-2-gamma) dr.
        res.bound_terms["truncation"] = env * F.radius ** (-1.0 - F.gamma) / (1.0 + F.gamma)
    if radii is None:
        radii = (4.0 * base_radius, 8.0 * base_radius, 16.0 * base_radius)
    if radii:
        _report(res, radii, n_dir, base_radius)
    return res


def pressure_potential(f: CompactForcing, near_field: bool = True):
    """``p(x) = int (x - y) . f(y) / (2 pi |x - y|^2) dy`` as a callable."""
    pts, w, _, fv = f.samples()
    keep = np.any(fv != 0.0, axis=1)
    pts, wf = pts[keep], (w[:, None] * fv)[keep]
    near = _NearField(f.f, None, f.panel_width, f.n_theta, f.R) if near_field else None

    def kernel_sum(xi, Y, WF):
        d = xi[None, :] - Y
        q = np.sum(d * d, axis=-1)
        if np.any(q == 0.0):
            raise ValueError("evaluation point coincides with a quadrature node")
        return float(np.sum(np.sum(d * WF, axis=-1) / q)) / (2.0 * math.pi)

    def p(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        out = np.empty(len(flat))
        for n, xi in enumerate(flat):
            if near is not None and near.applies(xi):
                far, kp, ly, lw = near.split(xi, pts)
                lv = np.asarray(f.f(ly), dtype=float)
                out[n] = kernel_sum(xi, pts[far], wf[far] * kp[:, None]) + kernel_sum(xi, ly, lw[:, None] * lv)
            else:
                out[n] = kernel_sum(xi, pts, wf)
        return out.reshape(x.shape[:-1])

    return p


def stokes_residual(u: Callable, p: Callable, alpha: float, x, h: float, f: Callable | None = None):
    """Second-order finite-difference residual of the rotating Stokes system at ``x``.

    Returns ``(momentum residual (2,), divergence)``.
    """
    x = np.asarray(x, dtype=float)
    e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
    stencil = np.array([x, x + e1, x - e1, x + e2, x - e2])
    U = u(stencil)
    P = p(stencil)
    lap = (U[1] + U[2] + U[3] + U[4] - 4.0 * U[0]) / (h * h)
    du1 = (U[1] - U[2]) / (2.0 * h)
    du2 = (U[3] - U[4]) / (2.0 * h)
    gp = np.array([(P[1] - P[2]) / (2.0 * h), (P[3] - P[4]) / (2.0 * h)])
    xp = perp(x)
    adv = xp[0] * du1 + xp[1] * du2 - perp(U[0])
    fx = np.zeros(2) if f is None else np.asarray(f(x[None, :]), dtype=float)[0]
    mom = -lap - alpha * adv + gp - fx
    div = du1[0] + du2[1]
    return mom, float(div)


def forcing_from_grid(grid: GridData, R: float | None = None, **rule) -> CompactForcing:
    """Cubic interpolant of a cartesian ``f1 f2`` grid file; zero outside the grid."""
    if grid.coords != "cartesian" or grid.components[:2] != ("f1", "f2"):
        raise ValueError("expected a cartesian grid with components f1 f2")
    ax0, ax1 = grid.axis(0), grid.axis(1)
    method = "cubic" if min(len(ax0), len(ax1)) >= 4 else "linear"
    interps = [
        RegularGridInterpolator((ax0, ax1), grid.values[..., c], method=method, bounds_error=False, fill_value=0.0)
        for c in range(2)
    ]
    if R is None:
        R = float(np.max(np.abs(grid.bounds))) * math.sqrt(2.0)

    def f(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        vals = np.stack([ip(flat) for ip in interps], axis=-1)
        vals[np.hypot(flat[:, 0], flat[:, 1]) > R] = 0.0
        return vals.reshape(x.shape)

    return CompactForcing(f, R, check=False, **rule)
