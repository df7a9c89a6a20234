"""Navier-Stokes flow past a rotating disk by Picard iteration.

The velocity is written ``u = a U + beta V + w`` with the circular fields
``U = phi x^perp`` and ``V = (1 - phi) x^perp / (4 pi |x|^2)``.  The lift
``a U`` carries the boundary data, so each iterate solves the exterior linear
problem with zero boundary values and forcing
``div(G(beta, w) + H(F))`` where

    G(beta, w) = -a (U (x) w + w (x) U) - beta (V (x) w + w (x) V) - w (x) w,
    H(F)       = a grad U + F.

The gradient ``div[(aU + beta V) (x) (aU + beta V)]`` of a radial function is
absorbed in the pressure.  ``(A (x) B)_ij = A_i B_j`` and ``(grad v)_ij = d_j v_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exterior import (
    GridForcing,
    SpectralGrid,
    _as_modes,
    _cartesian_derivatives,
    b_omega_coefficient,
    radial_discretization,
    solve_exterior_linear,
    spectral_divergence,
    stress_torque,
)
from .fields import CutoffProfile, perp
from .quadrature import gauss_legendre
from .wholeplane import TensorForcing

__all__ = [
    "CircularFields",
    "ForcingNorms",
    "NSProblem",
    "SolutionDecomposition",
    "ThresholdTriple",
    "PicardResult",
    "NonConvergenceError",
    "AccuracyError",
    "OutOfRegimeError",
    "assemble_forcing",
    "fixed_point_map",
    "picard_solve",
    "smallness_diagnostic",
    "threshold_triple",
    "forcing_norms",
    "mollified_forcing",
    "energy_balance",
    "x0_distance",
    "absorber_curl_mean",
    "strong_residual",
    "stream_iterate",
    "random_ball_iterate",
]

_FOUR_PI = 4.0 * math.pi


class NonConvergenceError(RuntimeError):
    """Picard iteration stopped without meeting the tolerance; ``trace`` holds the distances."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


class AccuracyError(RuntimeError):
    """The converged fields miss the strong-form residual threshold."""


class OutOfRegimeError(ValueError):
    """Parameters lie outside the small-spin regime ``0 < |a| < 1/e``."""


def _circular_grad(x, h, dh):
    """``grad (h(r) e_theta)`` for samples ``h``, ``dh = h'`` at points ``x``."""
    r = np.hypot(x[..., 0], x[..., 1])
    er = x / r[..., None]
    et = perp(er)
    return dh[..., None, None] * et[..., :, None] * er[..., None, :] - (h / r)[..., None, None] * er[..., :, None] * et[..., None, :]


@dataclass(frozen=True)
class CircularFields:
    cutoff: CutoffProfile = field(default_factory=CutoffProfile)

    def U(self, x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        return self.cutoff(r)[..., None] * perp(x)

    def V(self, x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        return ((1.0 - self.cutoff(r)) / (_FOUR_PI * r**2))[..., None] * perp(x)

    def grad_U(self, x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        phi, dphi = self.cutoff(r), self.cutoff.dr(r)
        return _circular_grad(x, r * phi, phi + r * dphi)

    def grad_V(self, x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        phi, dphi = self.cutoff(r), self.cutoff.dr(r)
        h = (1.0 - phi) / (_FOUR_PI * r)
        dh = -dphi / (_FOUR_PI * r) - (1.0 - phi) / (_FOUR_PI * r**2)
        return _circular_grad(x, h, dh)

    def lap_U(self, x):
        """``div grad U = (3 phi' + r phi'') e_theta``; polynomial ramps only."""
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        amp = (3.0 * self.cutoff.dr(r) + r * self.cutoff.drr(r)) / r
        return amp[..., None] * perp(x)

    def invariants(self, grid: SpectralGrid) -> dict:
        """Discrete checks: divergences, rotation identities, far-field shape of ``V``."""
        rad = radial_discretization(grid)
        pts = _grid_points(rad, grid)
        out = {}
        for name, fn, gfn in (("U", self.U, self.grad_U), ("V", self.V, self.grad_V)):
            vals = fn(pts)
            d1 = spectral_divergence(rad, vals[..., None, :].repeat(2, axis=-2) * np.eye(2), grid.n_theta)
            out[f"div_{name}"] = float(np.max(np.abs(d1[..., 0] + d1[..., 1])))
            G = gfn(pts)
            rot = np.einsum("...j,...ij->...i", perp(pts), G) - perp(vals)
            out[f"rotation_{name}"] = float(np.max(np.abs(rot)))
        r = rad.r
        far = r >= 2.0 * self.cutoff.R0
        exact = perp(pts[far]) / (_FOUR_PI * r[far, None, None] ** 2)
        out["V_far_field"] = float(np.max(np.abs(self.V(pts[far]) - exact)))
        out["U_support"] = float(np.max(np.abs(self.U(pts[far]))))
        return out


def _grid_points(rad, grid):
    th = grid.theta()
    r = rad.r[:, None]
    return np.stack([r * np.cos(th)[None, :], r * np.sin(th)[None, :]], axis=-1)


def _sample_tensor(F: TensorForcing, pts):
    flat = pts.reshape(-1, 2)
    return np.asarray(F.F(flat), dtype=float).reshape(pts.shape[:-1] + (2, 2))


@dataclass(frozen=True)
class ForcingNorms:
    l2: float
    f_l2_6R0: float
    b_omega: float
    linf2: float
    linf2_gamma: float
    antisym_l1: float
    d_gamma: float
    gamma: float


@dataclass
class NSProblem:
    """Precomputed samples for one ``(alpha, F, grid)`` triple."""

    alpha: float
    F: TensorForcing | None
    grid: SpectralGrid
    gamma: float = 0.0
    cutoff: CutoffProfile | None = None

    def __post_init__(self):
        self.alpha = float(self.alpha)
        if self.cutoff is None:
            self.cutoff = CutoffProfile(self.grid.R0)
        self.fields = CircularFields(self.cutoff)
        self.rad = radial_discretization(self.grid)
        self.pts = _grid_points(self.rad, self.grid)
        n = self.grid.n_theta
        self.U = self.fields.U(self.pts)
        self.V = self.fields.V(self.pts)
        self.gU = self.fields.grad_U(self.pts)
        self.gV = self.fields.grad_V(self.pts)
        a = self.alpha
        H = a * self.gU
        try:
            fH = a * self.fields.lap_U(self.pts)
        except NotImplementedError:
            fH = spectral_divergence(self.rad, a * self.gU, n)
        if self.F is not None:
            Fs = _sample_tensor(self.F, self.pts)
            H = H + Fs
            if self.F.div is not None:
                fH = fH + np.asarray(self.F.div(self.pts.reshape(-1, 2)), dtype=float).reshape(self.pts.shape)
            else:
                fH = fH + spectral_divergence(self.rad, Fs, n)
            self.F_samples = Fs
            self.b_ext = b_omega_coefficient(self.F, self.cutoff)
        else:
            self.F_samples = np.zeros(self.pts.shape + (2,))
            self.b_ext = 0.0
        self.H = H
        self.fH = fH
        self.weights = (self.rad.w * self.rad.r)[:, None] * np.full(n, 2.0 * math.pi / n)[None, :]
        self.uniq = self.rad.unique()
        self.r = self.rad.r

    # -- discrete norms ------------------------------------------------------
    def l2(self, T):
        """``L^2(Omega_{r_max})`` norm of a vector or matrix field sampled on the grid."""
        axes = tuple(range(2, T.ndim))
        return float(math.sqrt(np.sum(self.weights * np.sum(T**2, axis=axes))))

    def linf_weighted(self, v, s):
        mag = np.hypot(v[self.uniq, :, 0], v[self.uniq, :, 1])
        return float(np.max((1.0 + self.r[self.uniq, None]) ** s * mag))

    def linf_ball(self, v, radius):
        sel = self.r[self.uniq] <= radius
        return float(np.max(np.hypot(v[self.uniq][sel, :, 0], v[self.uniq][sel, :, 1])))

    def ball_l2(self, v, radius, n_gl=64):
        """``L^2(1 < r < radius)`` via interpolation onto a Gauss-Legendre rule."""
        xg, wg = gauss_legendre(n_gl, 1.0, radius)
        Im = self.rad.interp(xg)
        tot = 0.0
        flat = v.reshape(v.shape[0], v.shape[1], -1)
        for c in range(flat.shape[-1]):
            vals = Im @ flat[..., c]
            tot += float(np.sum((wg * xg)[:, None] * vals**2) * 2.0 * math.pi / self.grid.n_theta)
        return math.sqrt(tot)


@dataclass
class SolutionDecomposition:
    alpha: float
    beta: float
    w: np.ndarray
    grad_w: np.ndarray
    gamma: float
    norms: dict
    problem: NSProblem = field(repr=False, default=None)
    linear: object = field(repr=False, default=None)

    def velocity(self):
        p = self.problem
        return self.alpha * p.U + self.beta * p.V + self.w

    def velocity_gradient(self):
        p = self.problem
        return self.alpha * p.gU + self.beta * p.gV + self.grad_w

    def x0_norm(self) -> float:
        return abs(self.beta) + self.norms["grad_l2"] + self.norms["linf1"]


def _decomposition(problem: NSProblem, beta, w, grad_w, linear=None) -> SolutionDecomposition:
    R0 = problem.grid.R0
    norms = {
        "grad_l2": problem.l2(grad_w),
        "linf1": problem.linf_weighted(w, 1.0),
        "linf1_gamma": problem.linf_weighted(w, 1.0 + problem.gamma),
        "linf_5R0": problem.linf_ball(w, 5.0 * R0),
    }
    return SolutionDecomposition(problem.alpha, float(beta), w, grad_w, problem.gamma, norms, problem, linear)


def zero_iterate(problem: NSProblem) -> SolutionDecomposition:
    z = np.zeros(problem.pts.shape)
    return _decomposition(problem, 0.0, z, np.zeros(z.shape + (2,)))


def stream_iterate(problem: NSProblem, beta, coeffs, decay: float = 1.0) -> SolutionDecomposition:
    """Iterate with ``w = grad^perp psi``, ``psi = (r-1)^2 exp(-(r-1)/decay) sum_k Re(c_k e^{ik theta})``.

    ``w`` is divergence free and vanishes with its gradient on ``r = 1``;
    ``coeffs[k]`` is the complex amplitude of mode ``k``.
    """
    rad, n = problem.rad, problem.grid.n_theta
    th = problem.grid.theta()
    s = rad.r - 1.0
    phi = s**2 * np.exp(-s / decay)
    dphi = (2.0 * s - s**2 / decay) * np.exp(-s / decay)
    k = np.arange(len(coeffs))
    c = np.asarray(coeffs, dtype=complex)
    ang = np.real(c[None, :] * np.exp(1j * k[None, :] * th[:, None]))  # (n, K)
    dang = np.real(1j * k[None, :] * c[None, :] * np.exp(1j * k[None, :] * th[:, None]))
    psi_t = ang.sum(axis=1)
    dpsi_t = dang.sum(axis=1)
    r = rad.r[:, None]
    ur = -phi[:, None] * dpsi_t[None, :] / r
    ut = dphi[:, None] * psi_t[None, :]
    cs, sn = np.cos(th)[None, :], np.sin(th)[None, :]
    w = np.stack([cs * ur - sn * ut, sn * ur + cs * ut], axis=-1)
    gw = np.empty(w.shape + (2,))
    for i in range(2):
        d1, d2 = _cartesian_derivatives(rad, w[..., i], n)
        gw[..., i, 0], gw[..., i, 1] = d1, d2
    return _decomposition(problem, beta, w, gw)


def random_ball_iterate(problem: NSProblem, rng, radius: float, n_modes: int = 4) -> SolutionDecomposition:
    """Random stream-function iterate rescaled so that its X_0 norm is ``radius * U(0, 1)``."""
    coeffs = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    coeffs[0] = coeffs[0].real
    decay = float(rng.uniform(0.5, 2.0))
    beta = float(rng.standard_normal())
    raw = stream_iterate(problem, beta, coeffs, decay)
    scale = radius * float(rng.uniform()) / raw.x0_norm()
    return stream_iterate(problem, beta * scale, coeffs * scale, decay)


def x0_distance(a: SolutionDecomposition, b: SolutionDecomposition) -> float:
    """``|db| + ||grad dw||_{L^2} + ||dw||_{L^inf_1}``."""
    p = a.problem
    dw = a.w - b.w
    return abs(a.beta - b.beta) + p.l2(a.grad_w - b.grad_w) + p.linf_weighted(dw, 1.0)


def _sym_outer(a, b):
    return a[..., :, None] * b[..., None, :] + b[..., :, None] * a[..., None, :]


def assemble_forcing(beta, w, alpha, problem: NSProblem):
    """``(G(beta, w) + H(F), div of it)`` on the grid, plus the symmetry defect of ``G``."""
    if w.shape != problem.pts.shape:
        raise ValueError(f"w has shape {w.shape}, grid expects {problem.pts.shape}")
    G = -alpha * _sym_outer(problem.U, w) - beta * _sym_outer(problem.V, w) - w[..., :, None] * w[..., None, :]
    fG = spectral_divergence(problem.rad, G, problem.grid.n_theta)
    asym = float(np.max(np.abs(G[..., 0, 1] - G[..., 1, 0])))
    return G + problem.H, fG + problem.fH, asym


def absorber_curl_mean(beta, problem: NSProblem) -> float:
    """Largest angular mean of ``curl div[(aU + bV) (x) (aU + bV)]``; zero for a pure gradient."""
    c = problem.alpha * problem.U + beta * problem.V
    T = c[..., :, None] * c[..., None, :]
    d = spectral_divergence(problem.rad, T, problem.grid.n_theta)
    th = problem.grid.theta()
    dt = -np.sin(th)[None, :] * d[..., 0] + np.cos(th)[None, :] * d[..., 1]
    rad = problem.rad
    n = problem.grid.n_theta
    mt = _as_modes(dt, n)
    curl0 = rad.D @ mt[:, 0] + mt[:, 0] / rad.r
    return float(np.max(np.abs(curl0)))


def fixed_point_map(omega: SolutionDecomposition, problem: NSProblem) -> SolutionDecomposition:
    """``Phi(beta, w) = (psi, u - psi V)`` for the linear solve with forcing ``div(G + H)``."""
    a = problem.alpha
    Ftot, ftot, asym = assemble_forcing(omega.beta, omega.w, a, problem)
    if a == 0.0:
        if np.any(ftot):
            raise OutOfRegimeError("alpha = 0 is supported only with zero forcing")
        return zero_iterate(problem)
    sol = solve_exterior_linear(
        a, GridForcing(F=Ftot, f=ftot), problem.grid, cutoff=problem.cutoff, gamma=problem.gamma, b_omega=problem.b_ext
    )
    psi = sol.beta
    w = sol.u - psi * problem.V
    gw = sol.velocity_gradient() - psi * problem.gV
    out = _decomposition(problem, psi, w, gw, sol)
    out.norms["G_antisymmetry"] = asym
    out.norms["stress_torque"] = sol.torque
    return out


_FD4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD4_2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _absorber_pressure(problem: NSProblem, beta, r):
    """``P(r) = -int_1^r h(s)^2 / s ds`` where ``aU + beta V = h(r) e_theta``."""
    a, cf = problem.alpha, problem.cutoff
    knots = [1.0, cf.R0, cf.outer_radius]
    xg, wg = gauss_legendre(24, 0.0, 1.0)

    def h(s):
        phi = cf(s)
        return a * s * phi + beta * (1.0 - phi) / (_FOUR_PI * s)

    out = np.zeros_like(r)
    for i, rr in np.ndenumerate(r):
        total, lo = 0.0, 1.0
        for kn in knots[1:] + [rr]:
            hi = min(kn, rr)
            if hi > lo:
                s = lo + (hi - lo) * xg
                total += float(np.sum(wg * (hi - lo) * h(s) ** 2 / s))
                lo = hi
        out[i] = -total
    return out


def strong_residual(dec: SolutionDecomposition, points=None, h: float = 1e-2) -> dict:
    """Momentum and continuity residuals of the full Navier-Stokes system.

    ``u = aU + u_lin`` with ``u_lin`` interpolated from the last linear solve and
    ``p = q_lin - P``.  Derivatives are fourth-order central differences at
    points kept ``2h`` away from element ends, so the check does not reuse the
    collocation operators.
    """
    p = dec.problem
    sol = dec.linear
    if sol is None:
        raise ValueError("decomposition carries no linear solve")
    R0 = p.grid.R0
    if points is None:
        radii = [r for r in (1.3, 1.6, 2.5, 3.0, 4.0, 6.0, 9.0) if r * R0 < p.grid.r_max / 2]
        radii = [r * R0 for r in radii]
        ang = 2.0 * math.pi * (np.arange(7) + 0.37) / 7.0
        points = np.array([[r * math.cos(t), r * math.sin(t)] for r in radii for t in ang])
    points = np.asarray(points, dtype=float)
    off = np.arange(-2, 3) * h
    # stencil: (n, 2 directions, 5, 2)
    st = points[:, None, None, :] + np.stack([np.stack([off, 0 * off], -1), np.stack([0 * off, off], -1)])[None]
    flat = st.reshape(-1, 2)
    rr = np.hypot(flat[:, 0], flat[:, 1])
    U = p.fields.U(flat) * p.alpha + sol.evaluate(flat)
    P = sol.evaluate_pressure(flat) - _absorber_pressure(p, dec.beta, rr)
    U = U.reshape(st.shape)
    P = P.reshape(st.shape[:-1])
    du = np.einsum("s,ndsc->ndc", _FD4, U) / h  # d_d u_c
    d2u = np.einsum("s,ndsc->ndc", _FD4_2, U) / h**2
    dp = np.einsum("s,nds->nd", _FD4, P) / h
    u0 = U[:, 0, 2, :]
    lap = d2u.sum(axis=1)
    grad = np.swapaxes(du, 1, 2)  # [n, c, d] = d_d u_c
    xp = perp(points)
    rot = np.einsum("nd,ncd->nc", xp, grad) - perp(u0)
    adv = np.einsum("nd,ncd->nc", u0, grad)
    if p.F is not None:
        fx = p.F.divergence(points)
    else:
        fx = np.zeros_like(points)
    mom = -lap - p.alpha * rot + adv + dp - fx
    div = grad[:, 0, 0] + grad[:, 1, 1]
    scale = max(1.0, float(np.max(np.abs(lap))), float(np.max(np.abs(adv))), float(np.max(np.abs(fx))))
    m = float(np.max(np.abs(mom)))
    return {
        "momentum_max": m,
        "divergence_max": float(np.max(np.abs(div))),
        "relative": m / scale,
        "n_points": int(len(points)),
        "fd_step": h,
    }


def _lap_U_samples(p: NSProblem):
    try:
        return p.fields.lap_U(p.pts)
    except NotImplementedError:
        return spectral_divergence(p.rad, p.gU, p.grid.n_theta)


def energy_balance(dec: SolutionDecomposition) -> dict:
    """Both sides of ``||grad v||^2 = a <U (x) v, grad v> - <H, grad v>`` with ``v = beta V + w``."""
    p = dec.problem
    v = dec.beta * p.V + dec.w
    gv = dec.beta * p.gV + dec.grad_w
    W = p.weights

    def pair(A, B):
        return float(np.sum(W * np.sum(A * B, axis=(-1, -2))))

    lhs = pair(gv, gv)
    conv = pair(p.U[..., :, None] * v[..., None, :], gv)
    rhs = p.alpha * conv - pair(p.H, gv)
    fitted_C = abs(conv) / lhs if lhs > 0 else 0.0
    H2 = pair(p.H, p.H)
    return {
        "grad_v_sq": lhs,
        "rhs": rhs,
        "residual": abs(lhs - rhs),
        "relative_residual": abs(lhs - rhs) / lhs if lhs > 0 else abs(rhs),
        "fitted_C": fitted_C,
        "H_sq": H2,
        "inequality_holds": bool((1.0 - fitted_C * abs(p.alpha)) * lhs <= H2 * (1.0 + 1e-12)),
    }


def smallness_diagnostic(alpha, beta, F_l2, w_norms) -> tuple[float, list]:
    """``M = (|a| + |b|) g + |b| L + L g |log g| + |a| + ||F||_{L^2}``.

    ``g = ||grad w||_{L^2}``, ``L = ||w||_{L^inf_1}``; ``w_norms`` is a mapping with
    keys ``grad_l2`` and ``linf1`` or a :class:`SolutionDecomposition`.
    Returns ``(M, flags)``; ``g >= 1`` is flagged.
    """
    if isinstance(w_norms, SolutionDecomposition):
        w_norms = w_norms.norms
    g, L = float(w_norms["grad_l2"]), float(w_norms["linf1"])
    a, b = abs(float(alpha)), abs(float(beta))
    flags = []
    if g >= 1.0:
        flags.append("grad_w_not_small")
    logterm = L * g * abs(math.log(g)) if g > 0 else 0.0
    return (a + b) * g + b * L + logterm + a + float(F_l2), flags


def _d_gamma(problem: NSProblem, gamma: float) -> float:
    """``sup_{rho >= 4 R0} rho^gamma |int_{|y| >= rho/2} (F12 - F21)|`` over ``rho = 4 R0 2^j``."""
    if problem.F is None:
        return 0.0
    p = problem
    anti = p.F_samples[..., 0, 1] - p.F_samples[..., 1, 0]
    best = 0.0
    rho = 4.0 * p.grid.R0
    while rho / 2.0 < p.grid.r_max:
        total = float(np.sum(p.weights * anti))
        tail = total - _ball_integral(p, anti, rho / 2.0)
        best = max(best, rho**gamma * abs(tail))
        rho *= 2.0
    return best


def _ball_integral(p: NSProblem, vals, radius, n_gl=64):
    """``int_{1 < r < radius}`` of a scalar grid field."""
    xg, wg = gauss_legendre(n_gl, 1.0, radius)
    Im = p.rad.interp(xg)
    return float(np.sum((wg * xg)[:, None] * (Im @ vals)) * 2.0 * math.pi / p.grid.n_theta)


def forcing_norms(problem: NSProblem) -> ForcingNorms:
    p = problem
    g = p.gamma
    if p.F is None:
        return ForcingNorms(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, g)
    Fs = p.F_samples
    f_ext = p.fH - p.alpha * _lap_U_samples(p)
    mag = np.sqrt(np.sum(Fs[p.uniq] ** 2, axis=(-1, -2)))
    rr = (1.0 + p.r[p.uniq])[:, None]
    anti = Fs[..., 0, 1] - Fs[..., 1, 0]
    return ForcingNorms(
        l2=p.l2(Fs),
        f_l2_6R0=p.ball_l2(f_ext, 6.0 * p.grid.R0),
        b_omega=float(p.b_ext),
        linf2=float(np.max(rr**2 * mag)),
        linf2_gamma=float(np.max(rr ** (2.0 + g) * mag)),
        antisym_l1=float(np.sum(p.weights * np.abs(anti))),
        d_gamma=_d_gamma(p, g),
        gamma=g,
    )


@dataclass(frozen=True)
class ThresholdTriple:
    delta1: float
    delta2: float
    delta3: float
    C0: float
    gamma: float
    flags: dict

    def contains(self, dec: SolutionDecomposition) -> dict:
        n = dec.norms
        return {
            "first": abs(dec.beta) + n["grad_l2"] + n["linf_5R0"] <= self.delta1,
            "second": n["linf1"] <= self.delta2,
            "third": n["linf1_gamma"] <= self.delta3,
        }


def threshold_triple(alpha, norms: ForcingNorms, C0: float = 1.0) -> ThresholdTriple:
    """Radii of the ball on which the fixed-point map is shown to contract.

    ``delta3`` is raised to ``delta2`` when the closed form falls below it, and
    the event is flagged.
    """
    a = abs(float(alpha))
    if not (0.0 < a < math.exp(-1.0)):
        raise OutOfRegimeError("threshold formulas need 0 < |alpha| < 1/e")
    K = 16.0 * (C0 + 1.0)
    la = abs(math.log(a))
    d1 = K * (a + norms.l2 + abs(norms.b_omega) + norms.f_l2_6R0)
    ld1 = abs(math.log(d1))
    d2 = K / ld1 * (a**-0.5 * d1 + la * (a + norms.linf2) + norms.antisym_l1)
    g = norms.gamma
    d3_formula = 2.0 * (a ** (-(1.0 + g) / 2.0) * d1 + a ** (-g / 2.0) * la * norms.linf2_gamma + norms.d_gamma)
    d3 = max(d3_formula, d2)
    flags = {
        "delta1_small": d1 < 1.0 / K,
        "delta2_small": d2 <= 1.0 / (K * ld1),
        "delta1_le_delta2": d1 <= d2,
        "delta3_raised": d3_formula < d2,
        "delta3_formula": d3_formula,
    }
    return ThresholdTriple(d1, d2, d3, float(C0), g, flags)


def smallness_condition(alpha, norms: ForcingNorms) -> float:
    """Left side of the existence condition; compared with a configured ``epsilon``."""
    a = abs(float(alpha))
    la = abs(math.log(a))
    g = norms.gamma
    inner = (
        a**-0.5 * (abs(norms.b_omega) + norms.l2 + norms.f_l2_6R0) + norms.antisym_l1 + la * norms.linf2
    )
    return a ** ((1.0 - g) / 2.0) * la + a ** (-g / 2.0) * la * inner


def mollified_forcing(F: TensorForcing, n: float, *, gamma: float = 0.5) -> TensorForcing:
    """``F_n = exp(-|x|^2 / n) F`` with ``div F_n = e (f - (2/n) F x)``."""
    if not n >= 1:
        raise ValueError("n must be >= 1")

    def Fn(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(-np.sum(x**2, axis=-1) / n)
        return e[..., None, None] * np.asarray(F.F(x), dtype=float)

    div = None
    if F.div is not None:

        def div(x):
            x = np.asarray(x, dtype=float)
            e = np.exp(-np.sum(x**2, axis=-1) / n)
            Fv = np.asarray(F.F(x), dtype=float)
            fv = np.asarray(F.div(x), dtype=float)
            return e[..., None] * (fv - (2.0 / n) * np.einsum("...ij,...j->...i", Fv, x))

    if F.compact:
        return TensorForcing(Fn, gamma=gamma, support_radius=F.support_radius, div=div, n_r=F.n_r, n_theta=F.n_theta, panel_width=F.panel_width)
    quad = min(F.radius, math.sqrt(40.0 * n))
    return TensorForcing(Fn, gamma=gamma, quad_radius=quad, div=div, n_r=F.n_r, n_theta=F.n_theta, panel_width=F.panel_width)


@dataclass
class PicardResult:
    solution: SolutionDecomposition
    distances: list
    ratios: list
    iterations: int
    residual: dict
    energy: dict
    thresholds: ThresholdTriple | None
    forcing: ForcingNorms
    smallness: float | None
    smallness_ok: bool | None
    membership: dict | None
    torque_consistency: float
    flags: list

    def summary(self) -> dict:
        s = self.solution
        return {
            "beta": s.beta,
            "alpha": s.alpha,
            "gamma": s.gamma,
            "iterations": self.iterations,
            "distances": list(self.distances),
            "contraction_ratios": list(self.ratios),
            "norms": dict(s.norms),
            "x0_norm": s.x0_norm(),
            "residual": dict(self.residual),
            "energy": dict(self.energy),
            "torque_consistency": self.torque_consistency,
            "flags": list(self.flags),
        }


def picard_solve(
    alpha,
    F: TensorForcing | None,
    grid: SpectralGrid,
    *,
    tol: float = 1e-10,
    max_iter: int = 200,
    gamma: float = 0.0,
    cutoff: CutoffProfile | None = None,
    C0: float = 1.0,
    epsilon: float = 1.0,
    residual_tol: float = 1e-4,
    problem: NSProblem | None = None,
) -> PicardResult:
    """Iterate ``omega^0 = Phi(0)``, ``omega^n = Phi(omega^(n-1))`` until the X_0 step is below ``tol``."""
    a = float(alpha.alpha if hasattr(alpha, "alpha") else alpha)
    if problem is None:
        problem = NSProblem(a, F, grid, gamma, cutoff)
    fn = forcing_norms(problem)
    flags = []
    thresholds = smallness = ok = None
    if 0.0 < abs(a) < math.exp(-1.0):
        thresholds = threshold_triple(a, fn, C0)
        smallness = smallness_condition(a, fn)
        ok = smallness < epsilon
        if not ok:
            flags.append("smallness_condition_not_met")
    else:
        flags.append("alpha_outside_small_regime")
    cur = fixed_point_map(zero_iterate(problem), problem)
    distances, ratios = [], []
    growth = 0
    for it in range(1, max_iter + 1):
        nxt = fixed_point_map(cur, problem)
        d = x0_distance(nxt, cur)
        if distances:
            ratios.append(d / distances[-1] if distances[-1] > 0 else 0.0)
            growth = growth + 1 if d > 2.0 * distances[-1] else 0
        distances.append(d)
        cur = nxt
        if d < tol:
            break
        if growth >= 3:
            raise NonConvergenceError("X_0 step doubled on three consecutive iterations", distances)
    else:
        raise NonConvergenceError(f"no convergence within {max_iter} iterations", distances)
    residual = strong_residual(cur)
    if residual["relative"] > residual_tol:
        raise AccuracyError(f"strong-form residual {residual['relative']:.2e} exceeds {residual_tol:.1e}")
    energy = energy_balance(cur)
    membership = thresholds.contains(cur) if thresholds is not None else None
    torque = stress_torque(cur.velocity_gradient()[0] - a * problem.gU[0], np.zeros(grid.n_theta), grid.theta())
    consistency = abs(torque + problem.b_ext - cur.beta)
    return PicardResult(
        solution=cur,
        distances=distances,
        ratios=ratios,
        iterations=len(distances),
        residual=residual,
        energy=energy,
        thresholds=thresholds,
        forcing=fn,
        smallness=smallness,
        smallness_ok=ok,
        membership=membership,
        torque_consistency=consistency,
        flags=flags,
    )
