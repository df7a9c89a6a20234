"""Spectral solver for the rotating Stokes system outside the unit disk.

Unknowns are expanded in ``e^{ik theta}``.  For ``k != 0`` a stream function
``psi`` and the vorticity ``omega`` satisfy, with
``D_k = d_rr + d_r / r - k^2 / r^2`` and ``g = curl f``,

    D_k psi - omega = 0,        -(D_k + i a k) omega = g_k,

with ``psi = psi' = 0`` on ``r = 1``; the velocity is ``u_r = -ik psi / r``,
``u_theta = psi'``.  The mean azimuthal velocity ``v`` solves
``-(v'' + v'/r - v/r^2) = f_theta,0`` with ``v(1) = 0``.

The radial axis is cut into Chebyshev elements: ``[1, R0]`` (when
``R0 > 1``), ``[R0, 2 R0]`` so that cut-off kinks sit on element ends, and
``[2 R0, r_max]`` under the algebraic map ``r = a + L (1+xi) / (1-xi+eps)``.
Values and first derivatives are continuous across element ends.  At
``r_max`` the decaying exterior solutions are imposed: ``r v' + v = 0``;
``omega' = rho omega`` with ``rho = mu K_k'(mu r) / K_k(mu r)`` and
``mu^2 = -i a k``; ``psi - omega / mu^2`` decays like ``r^-|k|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import functools

from scipy import linalg, sparse, special

from .gridio import GridData
from .fields import CutoffProfile, WeightedFieldNorms, perp
from .quadrature import clenshaw_curtis, gauss_legendre
from .wholeplane import CompactForcing, ConvergenceError, TensorForcing, coefficient_c_tilde, PolarRule

__all__ = [
    "SpectralGrid",
    "RadialElement",
    "GridForcing",
    "ExteriorSolution",
    "ConditioningError",
    "ClosureError",
    "solve_exterior_linear",
    "torque_coefficient",
    "stress_torque",
    "b_omega_coefficient",
    "b_omega_boundary_identity",
    "remainder_decay_report",
    "mode_operator",
    "solution_grid_data",
    "global_operator",
]

_FOUR_PI = 4.0 * math.pi


class ConditioningError(RuntimeError):
    """A mode block is numerically singular for the requested grid."""


class ClosureError(RuntimeError):
    """The discrete solution does not decay towards ``r_max``."""


def cheb_lobatto(n: int):
    """Increasing Chebyshev-Lobatto nodes on ``[-1, 1]`` and the differentiation matrix."""
    j = np.arange(n + 1)
    x = -np.cos(np.pi * j / n)
    c = np.where((j == 0) | (j == n), 2.0, 1.0) * (-1.0) ** j
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _bary_weights(n):
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True)
class RadialElement:
    kind: str
    a: float
    b: float
    n: int
    stretch: float = 2.0

    @property
    def eps(self) -> float:
        return 2.0 * self.stretch / (self.b - self.a)

    def r_of(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "linear":
            return self.a + (self.b - self.a) * (xi + 1.0) / 2.0
        L, e = self.stretch, self.eps
        return self.a + L * (1.0 + xi) / (1.0 - xi + e)

    def dr_dxi(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "linear":
            return np.full_like(xi, (self.b - self.a) / 2.0)
        L, e = self.stretch, self.eps
        return L * (2.0 + e) / (1.0 - xi + e) ** 2

    def xi_of(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "linear":
            return 2.0 * (r - self.a) / (self.b - self.a) - 1.0
        L, e = self.stretch, self.eps
        s = (r - self.a) / L
        return (s * (1.0 + e) - 1.0) / (1.0 + s)

    def build(self):
        xi, Dxi = cheb_lobatto(self.n)
        r = self.r_of(xi)
        r[0], r[-1] = self.a, self.b
        J = self.dr_dxi(xi)
        D = Dxi / J[:, None]
        _, wcc = clenshaw_curtis(self.n)
        return xi, r, D, wcc * J

    def interp_matrix(self, r_eval):
        """Barycentric interpolation from the element nodes to ``r_eval``."""
        xi_nodes = -np.cos(np.pi * np.arange(self.n + 1) / self.n)
        w = _bary_weights(self.n)
        xe = self.xi_of(np.asarray(r_eval, dtype=float))
        diff = xe[:, None] - xi_nodes[None, :]
        exact = diff == 0.0
        diff[exact] = 1.0
        M = w[None, :] / diff
        M /= M.sum(axis=1, keepdims=True)
        rows = np.any(exact, axis=1)
        M[rows] = exact[rows].astype(float)
        return M


@dataclass(frozen=True)
class SpectralGrid:
    """Fourier-Chebyshev grid on ``1 <= r <= r_max``.

    ``n_r`` is the polynomial degree of the outer element; inner elements use
    ``n_inner`` (default ``max(16, n_r // 2)``).
    """

    n_theta: int = 32
    n_r: int = 48
    r_max: float = 1.0e4
    stretch: float = 2.0
    R0: float = 1.0
    n_inner: int | None = None

    def __post_init__(self):
        if self.n_theta < 16 or self.n_theta % 2:
            raise ValueError("n_theta must be an even integer >= 16")
        if self.n_r < 32:
            raise ValueError("n_r must be >= 32")
        if not self.r_max >= 8.0:
            raise ValueError("r_max must be >= 8")
        if self.R0 < 1.0 or self.r_max <= 4.0 * self.R0:
            raise ValueError("need R0 >= 1 and r_max > 4 R0")
        if not self.stretch > 0:
            raise ValueError("stretch must be positive")

    @property
    def inner_degree(self) -> int:
        return self.n_inner if self.n_inner is not None else max(16, self.n_r // 2)

    def elements(self):
        els = []
        if self.R0 > 1.0:
            els.append(RadialElement("linear", 1.0, self.R0, self.inner_degree))
        els.append(RadialElement("linear", self.R0, 2.0 * self.R0, self.inner_degree))
        els.append(RadialElement("algebraic", 2.0 * self.R0, self.r_max, self.n_r, self.stretch))
        return els

    def theta(self):
        return 2.0 * math.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def n_modes(self) -> int:
        """Highest retained wavenumber; the Nyquist mode is dropped."""
        return self.n_theta // 2 - 1

    def describe(self) -> dict:
        return {
            "n_theta": self.n_theta,
            "n_r": self.n_r,
            "n_inner": self.inner_degree,
            "r_max": self.r_max,
            "stretch": self.stretch,
            "R0": self.R0,
            "radial_map": "linear elements on [1, 2R0], algebraic r = a + L(1+xi)/(1-xi+eps) beyond",
        }


class _Radial:
    """Concatenated element nodes with block-diagonal derivative operators."""

    def __init__(self, grid: SpectralGrid):
        self.grid = grid
        self.elements = grid.elements()
        rs, Ds, ws, self.offsets = [], [], [], []
        off = 0
        for el in self.elements:
            _, r, D, w = el.build()
            rs.append(r)
            Ds.append(D)
            ws.append(w)
            self.offsets.append(off)
            off += len(r)
        self.r = np.concatenate(rs)
        self.D = _block_diag(Ds)
        self.D2 = self.D @ self.D
        self.w = np.concatenate(ws)
        self.M = off
        self.starts = list(self.offsets)
        self.ends = [o + len(r) - 1 for o, r in zip(self.offsets, rs)]

    def unique(self):
        """Indices of the node list without interface duplicates."""
        keep = np.ones(self.M, dtype=bool)
        for s in self.starts[1:]:
            keep[s] = False
        return np.nonzero(keep)[0]

    def interp(self, r_eval):
        """Matrix mapping nodal values to values at ``r_eval`` (all in ``[1, r_max]``)."""
        r_eval = np.atleast_1d(np.asarray(r_eval, dtype=float))
        out = np.zeros((len(r_eval), self.M))
        for el, off in zip(self.elements, self.offsets):
            sel = (r_eval >= el.a) & (r_eval <= el.b)
            if el is not self.elements[0]:
                sel &= r_eval > el.a
            if np.any(sel):
                out[np.ix_(sel, np.arange(off, off + el.n + 1))] = el.interp_matrix(r_eval[sel])
        if np.any(np.abs(out.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("evaluation radius outside [1, r_max]")
        return out


@functools.lru_cache(maxsize=16)
def radial_discretization(grid: SpectralGrid) -> _Radial:
    return _Radial(grid)


def _block_diag(blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i : i + k, i : i + k] = b
        i += k
    return out


@dataclass
class GridForcing:
    """Forcing sampled on a grid's nodes: ``F`` of shape ``(M, n_theta, 2, 2)``.

    ``f`` (shape ``(M, n_theta, 2)``) may be given; otherwise it is the
    spectral divergence of ``F``.  ``c_tilde_tail`` is the part of
    ``int (F12 - F21)`` beyond ``r_max`` when known.
    """

    F: np.ndarray | None = None
    f: np.ndarray | None = None
    c_tilde_tail: float = 0.0


def _as_modes(field_polar, n_theta):
    return np.fft.rfft(field_polar, axis=1) / n_theta


def _from_modes(modes, n_theta):
    """Inverse of :func:`_as_modes` with the Nyquist mode dropped."""
    m = modes.copy()
    if m.shape[1] > n_theta // 2:
        m[:, n_theta // 2] = 0.0
    return np.fft.irfft(m * n_theta, n=n_theta, axis=1)


def _cart_to_polar(vec, th):
    c, s = np.cos(th)[None, :], np.sin(th)[None, :]
    return c * vec[..., 0] + s * vec[..., 1], -s * vec[..., 0] + c * vec[..., 1]


def _polar_to_cart(ur, ut, th):
    c, s = np.cos(th)[None, :], np.sin(th)[None, :]
    return np.stack([c * ur - s * ut, s * ur + c * ut], axis=-1)


def _cartesian_derivatives(rad: _Radial, fvals, n_theta):
    """``(d1 f, d2 f)`` of a scalar grid field via modal differentiation."""
    th = 2.0 * math.pi * np.arange(n_theta) / n_theta
    modes = _as_modes(fvals, n_theta)
    k = np.arange(modes.shape[1])
    dr = _from_modes(rad.D @ modes, n_theta)
    dth = _from_modes(1j * k[None, :] * modes, n_theta)
    c, s = np.cos(th)[None, :], np.sin(th)[None, :]
    r = rad.r[:, None]
    return c * dr - s / r * dth, s * dr + c / r * dth


def spectral_divergence(rad: _Radial, F, n_theta):
    """``(div F)_i = d_j F_ij`` of a sampled matrix field."""
    out = np.zeros(F.shape[:2] + (2,))
    for i in range(2):
        d1, _ = _cartesian_derivatives(rad, F[..., i, 0], n_theta)
        _, d2 = _cartesian_derivatives(rad, F[..., i, 1], n_theta)
        out[..., i] = d1 + d2
    return out


def _matching_rho(k, alpha, r):
    mu = np.sqrt(complex(0.0, -alpha * k))
    if mu.real < 0:
        mu = -mu
    z = mu * r
    kk = abs(k)
    ratio = (special.kve(kk - 1, z) + special.kve(kk + 1, z)) / (2.0 * special.kve(kk, z))
    return -mu * ratio, mu


def mode_operator(rad: _Radial, alpha: float, k: int):
    """Dense operator for wavenumber ``k``: ``(2M x 2M)`` for ``k != 0``, ``(M x M)`` for ``k = 0``.

    Rows of interior equations are scaled by ``r^2``.  The right-hand side
    rows are returned as a selector: ``(rows, r2)`` such that
    ``rhs[rows] = r2 * source``.
    """
    r, D, D2 = rad.r, rad.D, rad.D2
    M = rad.M
    R2 = r**2
    first, last = 0, M - 1
    if k == 0:
        A = -(R2[:, None] * D2 + r[:, None] * D - np.eye(M))
        A[first] = 0.0
        A[first, first] = 1.0
        for e in range(len(rad.elements) - 1):
            a, b = rad.ends[e], rad.starts[e + 1]
            A[a] = 0.0
            A[a, a], A[a, b] = 1.0, -1.0
            A[b] = D[a] - D[b]
        A[last] = r[last] * D[last]
        A[last, last] += 1.0
        return A
    Dk = R2[:, None] * D2 + r[:, None] * D - k * k * np.eye(M)
    Z = np.zeros((M, M))
    A = np.block([[Dk, -np.diag(R2)], [Z, -(Dk + 1j * alpha * k * np.diag(R2))]]).astype(complex)
    P, W = slice(0, M), slice(M, 2 * M)
    A[first] = 0.0
    A[first, first] = 1.0
    A[M + first] = 0.0
    A[M + first, P] = D[first]
    for e in range(len(rad.elements) - 1):
        a, b = rad.ends[e], rad.starts[e + 1]
        for off in (0, M):
            A[off + a] = 0.0
            A[off + a, off + a], A[off + a, off + b] = 1.0, -1.0
            A[off + b] = 0.0
            A[off + b, off : off + M] = D[a] - D[b]
    rho, mu = _matching_rho(k, alpha, r[last])
    mu2 = mu * mu
    A[M + last] = 0.0
    A[M + last, W] = D[last]
    A[M + last, M + last] -= rho
    A[last] = 0.0
    A[last, P] = D[last]
    A[last, last] += abs(k) / r[last]
    A[last, M + last] += -rho / mu2 - abs(k) / (r[last] * mu2)
    return A


class _ModeFactor:
    """LU factors of a row-equilibrated block; continuity rows would otherwise drown."""

    def __init__(self, A):
        self.scale = 1.0 / np.max(np.abs(A), axis=1)
        As = A * self.scale[:, None]
        self.cond = float(np.linalg.cond(As))
        self.lu = linalg.lu_factor(As)

    def solve(self, rhs):
        return linalg.lu_solve(self.lu, rhs * self.scale)


@functools.lru_cache(maxsize=16)
def _mode_factors(grid: SpectralGrid, alpha: float, cond_limit: float):
    """Factors of every mode block, reused across solves with the same grid and spin."""
    rad = radial_discretization(grid)
    f0 = _ModeFactor(mode_operator(rad, alpha, 0))
    facs, conds = {0: f0}, {0: f0.cond}
    if alpha != 0.0:
        for k in range(1, grid.n_modes + 1):
            facs[k] = _ModeFactor(mode_operator(rad, alpha, k))
            conds[k] = facs[k].cond
    worst = max(conds, key=conds.get)
    if conds[worst] > cond_limit:
        raise ConditioningError(f"mode {worst} block condition number {conds[worst]:.2e} exceeds {cond_limit:.1e}")
    return facs, conds


def _equation_rows(rad: _Radial):
    """Rows that carry a differential equation (not boundary or interface rows)."""
    rows = np.ones(rad.M, dtype=bool)
    rows[0] = rows[-1] = False
    for e in range(len(rad.elements) - 1):
        rows[rad.ends[e]] = rows[rad.starts[e + 1]] = False
    return rows


def global_operator(grid: SpectralGrid, alpha: float):
    """Sparse operator over all retained wavenumbers; block-diagonal by construction."""
    rad = radial_discretization(grid)
    blocks = [sparse.csr_matrix(mode_operator(rad, alpha, k).astype(complex)) for k in range(grid.n_modes + 1)]
    return sparse.block_diag(blocks, format="csr"), [b.shape[0] for b in blocks]


@dataclass
class ExteriorSolution:
    grid: SpectralGrid
    alpha: float
    r: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    p: np.ndarray
    beta: float
    b_omega: float
    torque: float
    remainder: np.ndarray
    norms: WeightedFieldNorms
    cutoff: CutoffProfile
    psi_modes: np.ndarray
    omega_modes: np.ndarray
    v_mode: np.ndarray
    p_modes: np.ndarray
    beta_far: float
    pressure_normalized: bool = True
    diagnostics: dict = field(default_factory=dict)
    _rad: object = None

    # -- modal reconstruction -------------------------------------------------
    def _polar_modes(self):
        rad = self._rad
        K = self.grid.n_modes
        k = np.arange(K + 1)
        r = rad.r[:, None]
        ur = -1j * k[None, :] * self.psi_modes / r
        ut = rad.D @ self.psi_modes
        ut[:, 0] = self.v_mode
        ur[:, 0] = 0.0
        return ur, ut

    def velocity_gradient(self):
        """``grad u_ij = d_j u_i`` on the full node list, shape ``(M, n_theta, 2, 2)``."""
        rad, n = self._rad, self.grid.n_theta
        ur_m, ut_m = self._polar_modes()
        k = np.arange(ur_m.shape[1])[None, :]
        r = rad.r[:, None]
        ur, ut = _from_modes(ur_m, n), _from_modes(ut_m, n)
        drur, drut = _from_modes(rad.D @ ur_m, n), _from_modes(rad.D @ ut_m, n)
        dtur, dtut = _from_modes(1j * k * ur_m, n), _from_modes(1j * k * ut_m, n)
        G = np.empty(ur.shape + (2, 2))
        G[..., 0, 0] = drur
        G[..., 0, 1] = (dtur - ut) / r
        G[..., 1, 0] = drut
        G[..., 1, 1] = (dtut + ur) / r
        c, s = np.cos(self.theta)[None, :], np.sin(self.theta)[None, :]
        Q = np.empty(ur.shape + (2, 2))
        Q[..., 0, 0], Q[..., 0, 1], Q[..., 1, 0], Q[..., 1, 1] = c, -s, s, c
        return Q @ G @ np.swapaxes(Q, -1, -2)

    def vorticity(self):
        return _from_modes(self.omega_full_modes(), self.grid.n_theta)

    def omega_full_modes(self):
        rad = self._rad
        om = self.omega_modes.copy()
        om[:, 0] = rad.D @ self.v_mode + self.v_mode / rad.r
        return om

    def evaluate(self, points):
        """Velocity at arbitrary points with ``1 <= |x| <= r_max``."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        rr = np.hypot(flat[:, 0], flat[:, 1])
        th = np.arctan2(flat[:, 1], flat[:, 0])
        Im = self._rad.interp(rr)
        ur_m, ut_m = self._polar_modes()
        k = np.arange(ur_m.shape[1])
        ph = np.exp(1j * np.outer(th, k))
        wts = np.where(k == 0, 1.0, 2.0)
        ur = np.real(np.sum((Im @ ur_m) * ph * wts, axis=1))
        ut = np.real(np.sum((Im @ ut_m) * ph * wts, axis=1))
        c, s = np.cos(th), np.sin(th)
        out = np.stack([c * ur - s * ut, s * ur + c * ut], axis=-1)
        return out.reshape(pts.shape)

    def evaluate_pressure(self, points):
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        rr = np.hypot(flat[:, 0], flat[:, 1])
        th = np.arctan2(flat[:, 1], flat[:, 0])
        pm = self._rad.interp(rr) @ self.p_modes
        k = np.arange(pm.shape[1])
        wts = np.where(k == 0, 1.0, 2.0)
        return np.real(np.sum(pm * np.exp(1j * np.outer(th, k)) * wts, axis=1)).reshape(pts.shape[:-1])

    def quadrature_weights(self):
        """Weights for ``int_{1 < r < r_max} h dx`` on the full node list (duplicates included)."""
        rad = self._rad
        return (rad.w * rad.r)[:, None] * np.full(self.grid.n_theta, 2.0 * math.pi / self.grid.n_theta)[None, :]

    def grid_points(self):
        r = self._rad.r[:, None]
        return np.stack([r * np.cos(self.theta)[None, :], r * np.sin(self.theta)[None, :]], axis=-1)


def _sample(fn, pts):
    return np.asarray(fn(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2] + np.asarray(fn(pts[:1, 0])).shape[1:])


def _forcing_samples(forcing, rad: _Radial, grid: SpectralGrid):
    th = grid.theta()
    r = rad.r[:, None]
    pts = np.stack([r * np.cos(th)[None, :], r * np.sin(th)[None, :]], axis=-1)
    if forcing is None:
        return None, np.zeros(pts.shape)
    if isinstance(forcing, GridForcing):
        F = forcing.F
        f = forcing.f if forcing.f is not None else spectral_divergence(rad, F, grid.n_theta)
        return F, f
    if isinstance(forcing, TensorForcing):
        F = _sample(forcing.F, pts)
        # element-wise spectral differentiation stays exact across the cut-off kinks
        f = _sample(forcing.div, pts) if forcing.div is not None else spectral_divergence(rad, F, grid.n_theta)
        return F, f
    if isinstance(forcing, CompactForcing):
        return None, _sample(forcing.f, pts)
    raise TypeError(f"unsupported forcing type {type(forcing).__name__}")


def stress_torque(grad_u, p, theta) -> float:
    """``int_{|y|=1} y^perp . T(u, p) nu`` with ``nu = -y`` and ``T = grad u + grad u^T - p I``.

    ``grad_u`` has shape ``(n, 2, 2)`` and ``p`` shape ``(n,)`` on equispaced ``theta``.
    """
    c, s = np.cos(theta), np.sin(theta)
    er = np.stack([c, s], axis=-1)
    et = np.stack([-s, c], axis=-1)
    T = grad_u + np.swapaxes(grad_u, -1, -2) - p[:, None, None] * np.eye(2)
    vals = np.einsum("ni,nij,nj->n", et, T, -er)
    return float(np.sum(vals) * 2.0 * math.pi / len(theta))


def _grid_b_omega(F, f, rad, grid, cutoff, c_tilde_tail=0.0):
    """Grid quadrature of the b_Omega formula from sampled ``F`` and ``f``."""
    th = grid.theta()
    r = rad.r[:, None]
    pts = np.stack([r * np.cos(th)[None, :], r * np.sin(th)[None, :]], axis=-1)
    W = (rad.w * rad.r)[:, None] * (2.0 * math.pi / grid.n_theta)
    anti = F[..., 0, 1] - F[..., 1, 0]
    phi = cutoff(rad.r)[:, None]
    yp = perp(pts)
    gphi = cutoff.grad(pts)
    integrand = anti + (np.sum(yp * f, axis=-1) - anti) * phi + np.einsum("...i,...ij,...j->...", yp, F, gphi)
    return float(np.sum(W * integrand)) + c_tilde_tail


def solve_exterior_linear(
    alpha,
    forcing,
    grid: SpectralGrid,
    *,
    cutoff: CutoffProfile | None = None,
    gamma: float = 0.0,
    cond_limit: float = 1e15,
    b_omega: float | None = None,
) -> ExteriorSolution:
    """Solve ``-Lap u - a (x^perp . grad u - u^perp) + grad p = f``, ``div u = 0``, ``u = 0`` on ``r = 1``.

    ``forcing`` may be a :class:`TensorForcing` (``f = div F``), a
    :class:`CompactForcing`, a :class:`GridForcing` or ``None``.
    ``b_omega`` overrides the coefficient bookkeeping when the caller knows it.
    """
    a = float(alpha.alpha if hasattr(alpha, "alpha") else alpha)
    if cutoff is None:
        cutoff = CutoffProfile(grid.R0)
    if abs(cutoff.R0 - grid.R0) > 0:
        raise ValueError("cut-off radius must match the grid's R0")
    rad = radial_discretization(grid)
    n, K, M = grid.n_theta, grid.n_modes, rad.M
    th = grid.theta()
    F, f = _forcing_samples(forcing, rad, grid)
    if a == 0.0 and np.any(f):
        raise ValueError("alpha = 0 is supported only with zero forcing")
    fr, ft = _cart_to_polar(f, th)
    fr_m, ft_m = _as_modes(fr, n)[:, : K + 1], _as_modes(ft, n)[:, : K + 1]
    kk = np.arange(K + 1)
    r = rad.r
    # product rule: r g is not polynomial under the algebraic map
    g_m = rad.D @ ft_m + (ft_m - 1j * kk[None, :] * fr_m) / r[:, None]
    eq = _equation_rows(rad)
    R2 = r**2

    psi = np.zeros((M, K + 1), dtype=complex)
    omg = np.zeros((M, K + 1), dtype=complex)
    facs, conds = _mode_factors(grid, a, cond_limit)
    rhs0 = np.where(eq, R2 * ft_m[:, 0].real, 0.0)
    v = facs[0].solve(rhs0) if np.any(rhs0) else np.zeros(M)
    for k in range(1, K + 1):
        gk = g_m[:, k]
        if a == 0.0 or not np.any(np.abs(gk) > 0):
            continue
        rhs = np.zeros(2 * M, dtype=complex)
        rhs[M:][eq] = R2[eq] * gk[eq]
        sol = facs[k].solve(rhs)
        psi[:, k], omg[:, k] = sol[:M], sol[M:]

    # velocity on the grid
    ur_m = -1j * kk[None, :] * psi / r[:, None]
    ut_m = rad.D @ psi
    ut_m[:, 0] = v
    ur_m[:, 0] = 0.0
    ur, ut = _from_modes(ur_m, n), _from_modes(ut_m, n)
    u = _polar_to_cart(ur, ut, th)

    # pressure
    p_m = np.zeros((M, K + 1), dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        kv = kk[1:][None, :]
        p_m[:, 1:] = r[:, None] * (ft_m[:, 1:] + rad.D @ omg[:, 1:]) / (1j * kv) + a * r[:, None] * (rad.D @ psi[:, 1:])
    p_m[:, 0] = _radial_antiderivative(rad, fr_m[:, 0].real)
    R6 = min(6.0 * grid.R0, grid.r_max)
    xg, wg = gauss_legendre(64, 1.0, R6)
    p0g = rad.interp(xg) @ p_m[:, 0].real
    p_m[:, 0] -= np.sum(wg * xg * p0g) / np.sum(wg * xg)
    p = _from_modes(p_m, n)

    # torque and coefficient
    dummy = ExteriorSolution(
        grid=grid, alpha=a, r=r, theta=th, u=u, p=p, beta=0.0, b_omega=0.0, torque=0.0,
        remainder=u, norms=WeightedFieldNorms({}, 0.0, 0.0), cutoff=cutoff, psi_modes=psi,
        omega_modes=omg, v_mode=v, p_modes=p_m, beta_far=0.0, _rad=rad,
    )
    grad_u = dummy.velocity_gradient()
    torque = stress_torque(grad_u[0], p[0], th)
    if b_omega is None:
        if isinstance(forcing, (TensorForcing, CompactForcing)):
            b_omega = b_omega_coefficient(forcing, cutoff)
        elif isinstance(forcing, GridForcing) and forcing.F is not None:
            b_omega = _grid_b_omega(forcing.F, f, rad, grid, cutoff, forcing.c_tilde_tail)
        elif isinstance(forcing, GridForcing):
            W = dummy.quadrature_weights()
            b_omega = float(np.sum(W * np.sum(perp(dummy.grid_points()) * f, axis=-1)))
        else:
            b_omega = 0.0
    beta = torque + b_omega
    beta_far = _FOUR_PI * r[-1] * v[-1]

    pts = dummy.grid_points()
    V = _circular_V(pts, cutoff)
    w = u - beta * V
    dummy.beta, dummy.b_omega, dummy.torque, dummy.remainder, dummy.beta_far = beta, b_omega, torque, w, beta_far
    dummy.norms = _field_norms(dummy, u, grad_u, gamma)
    dummy.diagnostics = {
        "condition_numbers": dict(conds),
        "max_div": float(np.max(np.abs(grad_u[..., 0, 0] + grad_u[..., 1, 1]))),
        "boundary_speed": float(np.max(np.abs(u[0]))),
        "nodes": int(M),
    }
    _closure_check(dummy)
    return dummy


def _circular_V(pts, cutoff: CutoffProfile):
    rr = np.hypot(pts[..., 0], pts[..., 1])
    return ((1.0 - cutoff(rr)) / (_FOUR_PI * rr**2))[..., None] * perp(pts)


def _radial_antiderivative(rad: _Radial, h):
    """``P' = h`` with ``P(1) = 0`` and continuity across element ends."""
    M = rad.M
    A = rad.D.copy()
    rhs = h.astype(float).copy()
    A[0] = 0.0
    A[0, 0] = 1.0
    rhs[0] = 0.0
    for e in range(len(rad.elements) - 1):
        a, b = rad.ends[e], rad.starts[e + 1]
        A[b] = 0.0
        A[b, b], A[b, a] = 1.0, -1.0
        rhs[b] = 0.0
    return np.linalg.solve(A, rhs)


def _field_norms(sol: ExteriorSolution, u, grad_u, gamma):
    rad = sol._rad
    uniq = rad.unique()
    rr = rad.r[uniq]
    mag = np.hypot(u[uniq, :, 0], u[uniq, :, 1])
    linf = {}
    for s in sorted({0.0, 1.0, 1.0 + gamma}):
        linf[s] = float(np.max((1.0 + rr[:, None]) ** s * mag))
    W = sol.quadrature_weights()
    l2g = float(math.sqrt(np.sum(W * np.sum(grad_u**2, axis=(-1, -2)))))
    l2w = float(math.sqrt(np.sum(W * (np.hypot(u[..., 0], u[..., 1]) / (1.0 + rad.r[:, None])) ** 2)))
    return WeightedFieldNorms(linf, l2g, l2w)


def _closure_check(sol: ExteriorSolution):
    rad = sol._rad
    rr = rad.r
    ru = rr[:, None] * np.hypot(sol.u[..., 0], sol.u[..., 1])
    inner = ru[rr <= 0.5 * sol.grid.r_max]
    outer = ru[rr >= 0.9 * sol.grid.r_max]
    scale = float(np.max(inner)) if inner.size else 0.0
    if outer.size and float(np.max(outer)) > 10.0 * scale + 1e-300 and float(np.max(outer)) > 1e-12:
        raise ClosureError("r |u| grows towards r_max; refine the grid or enlarge r_max")


def torque_coefficient(sol: ExteriorSolution) -> float:
    """``int_{dOmega} y^perp . T(u, p) nu + b_Omega[f]`` for a solved problem."""
    if not sol.pressure_normalized:
        raise ValueError("pressure normalisation is undeclared")
    return sol.torque + sol.b_omega


def b_omega_coefficient(forcing, cutoff: CutoffProfile, *, n_r: int = 24, n_theta: int = 96, tol: float = 1e-10) -> float:
    """``b_Omega[f] = c~_Omega[F] + int_Omega {(y^perp . f - F12 + F21) phi + y^perp . F grad phi}``.

    For a :class:`CompactForcing` (no ``F`` available) this is
    ``c_Omega[f] = int_Omega y^perp . f``.
    """
    if isinstance(forcing, CompactForcing):
        R = max(forcing.R, 1.0 + 1e-12)
        pts, w, _ = PolarRule(1.0, R, n_r, n_theta, max(1.0, (R - 1.0) / 4)).nodes() if R > 1.0 else (np.zeros((0, 2)), np.zeros(0), None)
        if len(w) == 0:
            return 0.0
        fv = np.asarray(forcing.f(pts), dtype=float)
        return float(np.sum(w * np.sum(perp(pts) * fv, axis=1)))
    if not isinstance(forcing, TensorForcing):
        raise TypeError("b_Omega needs a TensorForcing or CompactForcing")
    ct = _c_tilde_exterior(forcing, tol)
    pts, w, _ = PolarRule(1.0, cutoff.outer_radius, n_r, n_theta, cutoff.R0 / 2.0).nodes()
    Fv = np.asarray(forcing.F(pts), dtype=float)
    fv = forcing.divergence(pts)
    yp = perp(pts)
    rr = np.hypot(pts[:, 0], pts[:, 1])
    phi = cutoff(rr)
    gphi = cutoff.grad(pts)
    anti = Fv[:, 0, 1] - Fv[:, 1, 0]
    body = (np.sum(yp * fv, axis=1) - anti) * phi + np.einsum("ni,nij,nj->n", yp, Fv, gphi)
    return ct + float(np.sum(w * body))


def _c_tilde_exterior(F: TensorForcing, tol: float) -> float:
    """``int_{|y| > 1} (F12 - F21)`` by expanding annuli."""

    def annulus(r0, r1):
        pts, w, _ = PolarRule(r0, r1, F.n_r, F.n_theta, max(F.panel_width, (r1 - r0) / 8.0)).nodes()
        Fv = np.asarray(F.F(pts), dtype=float)
        return float(np.sum(w * (Fv[:, 0, 1] - Fv[:, 1, 0])))

    if F.compact:
        return annulus(1.0, F.radius) if F.radius > 1.0 else 0.0
    r = max(2.0, F.radius / 4.0)
    total = annulus(1.0, r)
    for _ in range(80):
        piece = annulus(r, 2.0 * r)
        total += piece
        r *= 2.0
        if abs(piece) < tol:
            return total
    raise ConvergenceError("c~_Omega[F] did not settle")


def b_omega_boundary_identity(F: TensorForcing, *, n_theta: int = 256, tol: float = 1e-10) -> float:
    """``c~_Omega[F] - int_{|y|=1} e_theta . F e_r dtheta``; equals ``b_Omega`` for any cut-off."""
    th = 2.0 * math.pi * np.arange(n_theta) / n_theta
    er = np.stack([np.cos(th), np.sin(th)], axis=-1)
    et = perp(er)
    Fv = np.asarray(F.F(er), dtype=float)
    ring = float(np.sum(np.einsum("ni,nij,nj->n", et, Fv, er)) * 2.0 * math.pi / n_theta)
    return _c_tilde_exterior(F, tol) - ring


def remainder_decay_report(sol: ExteriorSolution, gamma: float, *, radii=None, n_dir: int = 64) -> dict:
    """``{radius: sup_theta r^(1+gamma) |u - beta V|}`` along ``4 R0, 8 R0, ...`` up to ``r_max / 2``.

    ``reference`` is the ``|a|^(-(1+gamma)/2)`` factor of the a priori bound and
    ``fitted_constant`` the smallest multiple of it covering the table.
    """
    R0 = sol.grid.R0
    if radii is None:
        radii = []
        rad = 4.0 * R0
        while rad <= sol.grid.r_max / 2.0:
            radii.append(rad)
            rad *= 2.0
    th = 2.0 * math.pi * np.arange(n_dir) / n_dir
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    out = {}
    for rad in radii:
        pts = rad * dirs
        w = sol.evaluate(pts) - sol.beta * _circular_V(pts, sol.cutoff)
        out[float(rad)] = float(np.max(rad ** (1.0 + gamma) * np.hypot(w[:, 0], w[:, 1])))
    ref = abs(sol.alpha) ** (-(1.0 + gamma) / 2.0) if sol.alpha != 0 else float("inf")
    vals = list(out.values())
    fitted = max(vals) / ref if vals and ref > 0 else 0.0
    return {"radii": out, "reference": ref, "fitted_constant": fitted}


def solution_grid_data(sol: ExteriorSolution, extra: dict | None = None) -> GridData:
    """Polar grid file payload: ``u1 u2 p`` on the distinct radial nodes."""
    idx = sol._rad.unique()
    r = sol._rad.r[idx]
    vals = np.concatenate([sol.u[idx], sol.p[idx][..., None]], axis=-1)
    meta = {
        "alpha": float(sol.alpha),
        "beta": float(sol.beta),
        "b_omega": float(sol.b_omega),
        "torque": float(sol.torque),
        "l2_grad": float(sol.norms.l2_grad),
        "l2_weighted": float(sol.norms.l2_weighted),
        "pressure_normalization": "zero mean on 1 < r < 6 R0",
    }
    for s_, v in sol.norms.linf_s.items():
        meta[f"linf_{s_:g}"] = float(v)
    meta.update({k: v for k, v in sol.grid.describe().items()})
    meta.update(extra or {})
    th = sol.theta
    return GridData(
        coords="polar",
        bounds=(float(r[0]), float(r[-1]), float(th[0]), float(th[-1])),
        resolution=(len(r), len(th)),
        components=("u1", "u2", "p"),
        values=vals,
        metadata=meta,
        nodes0=r,
        nodes1=th,
    )
