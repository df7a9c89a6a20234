"""Plane geometry, rotation frames, cut-off profiles and weighted norms.

Vectors are plain ``numpy`` arrays whose last axis has length 2; matrices
have trailing shape ``(2, 2)``.  Every helper broadcasts over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "perp",
    "rotation",
    "antisymmetric_part",
    "outer",
    "CutoffProfile",
    "DomainSpec",
    "weighted_sup_norm",
    "WeightedFieldNorms",
    "SpinParameter",
]


def perp(v):
    """Return ``v^perp = (-v2, v1)``; broadcasts over leading axes."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def rotation(theta):
    """Rotation matrix ``O(theta)``, shape ``theta.shape + (2, 2)``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def antisymmetric_part(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m - np.swapaxes(m, -1, -2))


def outer(a, b):
    """Tensor product ``(a ⊗ b)_ij = a_i b_j``."""
    return np.asarray(a)[..., :, None] * np.asarray(b)[..., None, :]


@dataclass(frozen=True)
class SpinParameter:
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha == 0.0:
            raise ValueError("spin parameter must be finite and nonzero")

    @property
    def magnitude(self) -> float:
        return abs(self.alpha)


# Smoothstep polynomials s -> p(s) with p(0)=0, p(1)=1 and vanishing
# derivatives at both ends up to the stated order.
def _smoothstep5(s):
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def _smoothstep5_d(s):
    return 30.0 * s**2 * (1.0 - s) ** 2


def _smoothstep5_dd(s):
    return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)


def _smoothstep7(s):
    return s**4 * (35.0 - 84.0 * s + 70.0 * s**2 - 20.0 * s**3)


def _smoothstep7_d(s):
    return 140.0 * s**3 * (1.0 - s) ** 3


def _smoothstep7_dd(s):
    return 420.0 * s**2 * (1.0 - s) ** 2 * (1.0 - 2.0 * s)


def _bump_pieces(s):
    # C-infinity transition built from exp(-1/s).
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a, b


def _smoothinf(s):
    a, b = _bump_pieces(s)
    return a / (a + b)


def _smoothinf_d(s):
    a, b = _bump_pieces(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = np.where(s > 0, a / np.where(s > 0, s, 1.0) ** 2, 0.0)
        db = np.where(s < 1, -b / np.where(s < 1, 1.0 - s, 1.0) ** 2, 0.0)
    return (da * b - a * db) / (a + b) ** 2


_RAMPS: dict[str, tuple[Callable, Callable, Callable | None]] = {
    "poly5": (_smoothstep5, _smoothstep5_d, _smoothstep5_dd),
    "poly7": (_smoothstep7, _smoothstep7_d, _smoothstep7_dd),
    "smooth": (_smoothinf, _smoothinf_d, None),
}


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cut-off: 1 on ``r <= R0``, 0 on ``r >= 2 R0``.

    ``ramp`` picks the transition: ``poly5`` (C^2), ``poly7`` (C^3) or
    ``smooth`` (C^infinity).  The polynomial ramps are exact polynomials in
    ``r`` on ``[R0, 2 R0]``, which the exterior solver exploits by putting an
    element boundary at both ends of the ramp.
    """

    R0: float = 1.0
    ramp: str = "poly5"

    def __post_init__(self):
        if not self.R0 >= 1.0:
            raise ValueError("R0 must be >= 1")
        if self.ramp not in _RAMPS:
            raise ValueError(f"unknown ramp {self.ramp!r}; choose from {sorted(_RAMPS)}")

    def _s(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.R0) / self.R0, 0.0, 1.0)

    def __call__(self, r):
        return 1.0 - _RAMPS[self.ramp][0](self._s(r))

    def dr(self, r):
        """d phi / d r."""
        return -_RAMPS[self.ramp][1](self._s(r)) / self.R0

    def drr(self, r):
        dd = _RAMPS[self.ramp][2]
        if dd is None:
            raise NotImplementedError("closed-form second derivative only for polynomial ramps")
        return -dd(self._s(r)) / self.R0**2

    def grad(self, x):
        """Cartesian gradient of ``phi(|x|)``."""
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, self.dr(r) / np.where(r > 0, r, 1.0), 0.0)
        return x * scale[..., None]

    @property
    def outer_radius(self) -> float:
        return 2.0 * self.R0


@dataclass(frozen=True)
class DomainSpec:
    kind: str = "exterior-unit-disk"
    R0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("whole-plane", "exterior-unit-disk"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.R0 < 1.0:
            raise ValueError("R0 must be >= 1")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "whole-plane":
            return np.ones(x.shape[:-1], dtype=bool)
        return np.hypot(x[..., 0], x[..., 1]) > 1.0

    def normal(self, x):
        """Unit normal on ``|x| = 1`` pointing out of the fluid, ``nu = -x``."""
        if self.kind != "exterior-unit-disk":
            raise ValueError("the whole plane has no boundary")
        x = np.asarray(x, dtype=float)
        return -x / np.hypot(x[..., 0], x[..., 1])[..., None]


def weighted_sup_norm(positions, values, s: float) -> float:
    """``max (1 + |x|)^s |f(x)|`` over the samples.

    ``values`` may be scalar, vector or matrix valued per sample; the
    pointwise magnitude is the Euclidean (Frobenius) norm.
    """
    if s < 0:
        raise ValueError("weight exponent must be nonnegative")
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values)
    if positions.size == 0 or values.size == 0:
        raise ValueError("weighted sup norm of an empty sample set is ill-posed")
    npts = positions.shape[:-1]
    mag = np.abs(values).reshape(npts + (-1,))
    mag = np.sqrt(np.sum(mag**2, axis=-1))
    rad = np.hypot(positions[..., 0], positions[..., 1])
    return float(np.max((1.0 + rad) ** s * mag))


@dataclass(frozen=True)
class WeightedFieldNorms:
    """Discrete norms of a field on a declared grid."""

    linf_s: dict
    l2_grad: float
    l2_weighted: float

    def __post_init__(self):
        for key, val in self.linf_s.items():
            if key < 0 or val < 0:
                raise ValueError("norm entries must be nonnegative")
        if self.l2_grad < 0 or self.l2_weighted < 0:
            raise ValueError("norm entries must be nonnegative")
