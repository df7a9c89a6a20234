"""Log-corrected Hardy inequality on the exterior of the unit disk.

For ``f`` with zero trace on ``|x| = 1`` the quantity

    lhs = ||f / (1 + |x|)||_{L^2}

is controlled by ``grad * log(e + linf1 / grad)`` where ``grad = ||grad f||``
and ``linf1 = sup (1 + |x|) |f|``.  Without the logarithm the 2D estimate is
false, so the fixed test family below contains slowly decaying log tails that
come close to saturating it.

Norms are discrete: Gauss-Legendre panels in ``r`` spaced geometrically up
to ``r_max`` times the trapezoidal rule in ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fields import CutoffProfile
from .quadrature import gauss_legendre

__all__ = [
    "DegenerateInputError",
    "TraceError",
    "HardyGrid",
    "HardyReport",
    "HardyTestField",
    "hardy_check",
    "hardy_family",
    "hardy_sweep",
    "fit_hardy_constant",
]


class DegenerateInputError(ValueError):
    """``grad f = 0`` while ``f`` is not identically zero."""


class TraceError(ValueError):
    """The field does not vanish on the obstacle boundary."""


@dataclass(frozen=True)
class HardyGrid:
    r_max: float
    panels_per_decade: int = 12
    n_gl: int = 16
    n_theta: int = 16
    breakpoints: tuple = ()

    def __post_init__(self):
        if not self.r_max > 1.0:
            raise ValueError("r_max must exceed the obstacle radius 1")
        if self.panels_per_decade < 1 or self.n_gl < 2 or self.n_theta < 4:
            raise ValueError("grid resolution too small")

    def radial(self):
        """Radial nodes and area weights ``2*pi*r*dr / n_theta`` per node."""
        n_pan = max(1, int(math.ceil(self.panels_per_decade * math.log10(self.r_max))))
        edges = set(np.geomspace(1.0, self.r_max, n_pan + 1).tolist())
        edges.update(b for b in self.breakpoints if 1.0 < b < self.r_max)
        edges = sorted(edges)
        rs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(self.n_gl, a, b)
            rs.append(x)
            ws.append(w * x)
        return np.concatenate(rs), np.concatenate(ws)

    def nodes(self):
        """Cartesian nodes ``(n_r * n_theta, 2)``, weights and radii."""
        r, wr = self.radial()
        th = 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta
        rr, tt = np.meshgrid(r, th, indexing="ij")
        pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
        w = np.repeat(wr * (2.0 * np.pi / self.n_theta), self.n_theta)
        return pts, w, rr.reshape(-1)


@dataclass
class HardyReport:
    lhs: float
    grad: float
    linf1: float
    bound: float
    ratio: float
    r_max: float
    simplified_bound: float = math.nan
    small_hypothesis: bool = False

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _fd_gradient(f, pts, h):
    out = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        d = (-f(pts + 2 * h * e) + 8 * f(pts + h * e) - 8 * f(pts - h * e) + f(pts - 2 * h * e)) / (12 * h)
        out.append(d)
    return np.stack(out, axis=-1)


def hardy_check(
    f: Callable,
    grid: HardyGrid,
    grad: Callable | None = None,
    *,
    trace_tol: float = 1e-10,
    fd_step: float = 1e-4,
) -> HardyReport:
    """Evaluate both sides of the inequality for ``f`` on ``grid``.

    ``f`` maps points ``(n, 2)`` to values ``(n,)`` or ``(n, d)``; ``grad``
    returns ``(n, 2)`` or ``(n, d, 2)``.  Without ``grad`` a fourth-order
    central difference is used.
    """
    pts, w, r = grid.nodes()
    vals = np.asarray(f(pts), dtype=float)
    vals2 = vals.reshape(len(pts), -1)
    if grad is None:
        g = _fd_gradient(lambda p: np.asarray(f(p), dtype=float).reshape(len(p), -1), pts, fd_step)
    else:
        g = np.asarray(grad(pts), dtype=float).reshape(len(pts), -1, 2)
    mag2 = np.sum(vals2**2, axis=1)
    lhs = math.sqrt(float(np.sum(w * mag2 / (1.0 + r) ** 2)))
    gnorm = math.sqrt(float(np.sum(w * np.sum(g**2, axis=(1, 2)))))
    linf1 = float(np.max((1.0 + r) * np.sqrt(mag2)))

    th = 2.0 * np.pi * np.arange(max(64, grid.n_theta)) / max(64, grid.n_theta)
    ring = np.stack([np.cos(th), np.sin(th)], axis=-1)
    trace = float(np.max(np.abs(np.asarray(f(ring), dtype=float))))
    if trace > trace_tol * max(1.0, linf1):
        raise TraceError(f"field does not vanish on |x| = 1 (max |f| = {trace:.3e})")

    if gnorm == 0.0:
        if linf1 > 0.0:
            raise DegenerateInputError("grad f vanishes but f does not")
        return HardyReport(0.0, 0.0, 0.0, 0.0, 0.0, grid.r_max, 0.0, True)
    bound = gnorm * math.log(math.e + linf1 / gnorm)
    small = math.e * gnorm + linf1 <= 1.0
    simplified = gnorm * abs(math.log(gnorm))
    return HardyReport(lhs, gnorm, linf1, bound, lhs / bound, grid.r_max, simplified, small)


@dataclass(frozen=True)
class HardyTestField:
    """Field ``f = scale * g(|x|)`` (scalar) or ``scale * g(|x|) e_theta`` (swirl)."""

    name: str
    profile: Callable
    dprofile: Callable
    r_max: float
    kind: str = "scalar"
    breakpoints: tuple = field(default=())
    scale: float = 1.0

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        g = self.scale * self.profile(r)
        if self.kind == "scalar":
            return g
        rs = np.where(r > 0, r, 1.0)
        return np.stack([-pts[..., 1] / rs * g, pts[..., 0] / rs * g], axis=-1)

    def grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        rs = np.where(r > 0, r, 1.0)
        er = pts / rs[..., None]
        g = self.scale * self.profile(r)
        dg = self.scale * self.dprofile(r)
        if self.kind == "scalar":
            return dg[..., None] * er
        # e_theta = (-sin, cos); d e_theta / d theta = -e_r, and grad theta = e_theta / r
        et = np.stack([-er[..., 1], er[..., 0]], axis=-1)
        return dg[..., None, None] * et[..., :, None] * er[..., None, :] - (g / rs)[..., None, None] * er[
            ..., :, None
        ] * et[..., None, :]

    def scaled(self, c: float) -> "HardyTestField":
        return HardyTestField(
            self.name, self.profile, self.dprofile, self.r_max, self.kind, self.breakpoints, self.scale * c
        )

    def grid(self, **kw) -> HardyGrid:
        return HardyGrid(self.r_max, breakpoints=self.breakpoints, **kw)


_RAMP = CutoffProfile(R0=1.0, ramp="poly5")


def _ramp(r):
    # 0 for r <= 1, 1 for r >= 2
    return 1.0 - _RAMP(r)


def _dramp(r):
    return -_RAMP.dr(r)


def _inverse(r_max):
    return HardyTestField(
        f"inverse_R{r_max:g}",
        lambda r: _ramp(r) / r,
        lambda r: _dramp(r) / r - _ramp(r) / r**2,
        r_max,
        breakpoints=(2.0,),
    )


def _log_tail(R, p, kind="scalar"):
    L = math.log(R / 2.0)

    def prof(r):
        s = np.clip(np.log(R / np.maximum(r, 1.0)) / L, 0.0, None)
        return _ramp(r) * s**p

    def dprof(r):
        s = np.clip(np.log(R / np.maximum(r, 1.0)) / L, 0.0, None)
        ds = np.where(r < R, -p * s ** (p - 1) / (L * r), 0.0)
        return _dramp(r) * s**p + _ramp(r) * ds

    return HardyTestField(f"log{p:g}_{kind}_R{R:g}", prof, dprof, R, kind, breakpoints=(2.0,))


def _log_tent(R, kind="scalar"):
    L = math.log(R)

    def prof(r):
        lr = np.log(np.maximum(r, 1.0))
        return np.clip(np.minimum(lr, 2.0 * L - lr) / L, 0.0, None)

    def dprof(r):
        return np.where(r < R, 1.0, np.where(r < R * R, -1.0, 0.0)) / (L * r)

    return HardyTestField(f"tent_{kind}_R{R:g}", prof, dprof, R * R, kind, breakpoints=(R,))


def hardy_family() -> list:
    """The fixed test family.

    ``inverse``: ramped ``1/|x|`` truncated at three radii.  ``log``: tails
    ``(log(R/|x|)/log(R/2))^p`` on ``2 <= |x| <= R``.  ``tent``: the
    near-extremal ``min(log|x|, log(R^2/|x|)) / log R`` on ``1 <= |x| <= R^2``,
    whose ratio tends to a positive limit as ``R`` grows.
    """
    fam = [_inverse(R) for R in (1e2, 1e3, 1e4)]
    for R in (1e2, 1e3, 1e4, 1e6):
        fam.append(_log_tail(R, 1))
        fam.append(_log_tail(R, 2))
    fam.append(_log_tail(1e4, 1, "swirl"))
    fam.extend(_log_tent(R) for R in (1e1, 1e2, 1e3))
    fam.append(_log_tent(1e2, "swirl"))
    return fam


def hardy_sweep(fields=None, **grid_kw) -> list:
    fields = hardy_family() if fields is None else fields
    out = []
    for fld in fields:
        rep = hardy_check(fld, fld.grid(**grid_kw), fld.grad)
        out.append((fld, rep))
    return out


def fit_hardy_constant(reports) -> float:
    """Smallest ``C`` with ``lhs <= C * bound`` over ``reports``."""
    return max((rep.ratio for rep in reports), default=0.0)
