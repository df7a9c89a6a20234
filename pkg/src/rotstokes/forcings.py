"""Closed-form tensor forcings ``F`` with analytic ``div F``.

These are the fixed test inputs shared by the command-line runs and the test
suite.  ``(div F)_i = d_j F_ij`` throughout.
"""

from __future__ import annotations

import numpy as np

from .wholeplane import TensorForcing

__all__ = ["gaussian_tensor", "bump_tensor", "algebraic_tensor", "compact_suite", "DEFAULT_MATRIX"]

DEFAULT_MATRIX = ((0.3, 1.0), (-0.4, 0.2))


def _apply(M, v):
    return np.einsum("ij,...j->...i", M, v)


def gaussian_tensor(
    eps: float,
    matrix=DEFAULT_MATRIX,
    center=(2.5, 0.0),
    width: float = 1.0,
    *,
    quad_radius: float = 12.0,
    gamma: float = 0.5,
    n_r: int = 24,
    n_theta: int = 128,
) -> TensorForcing:
    """``F = eps M exp(-|x - c|^2 / w^2)``; decays faster than any power."""
    M = np.asarray(matrix, dtype=float)
    c = np.asarray(center, dtype=float)

    def F(x):
        x = np.asarray(x, dtype=float)
        g = np.exp(-np.sum((x - c) ** 2, axis=-1) / width**2)
        return eps * g[..., None, None] * M

    def div(x):
        x = np.asarray(x, dtype=float)
        g = np.exp(-np.sum((x - c) ** 2, axis=-1) / width**2)
        return eps * _apply(M, -2.0 * (x - c) / width**2) * g[..., None]

    return TensorForcing(F, gamma=gamma, quad_radius=quad_radius, div=div, n_r=n_r, n_theta=n_theta)


def bump_tensor(
    eps: float,
    matrix=DEFAULT_MATRIX,
    radius: float = 1.0,
    slope=((0.0, 0.0), (0.0, 0.0)),
    *,
    n_r: int = 24,
    n_theta: int = 96,
) -> TensorForcing:
    """``F = eps (M + x_1 N) (1 - |x|^2/R^2)^4`` inside ``|x| < R``, zero outside."""
    M = np.asarray(matrix, dtype=float)
    N = np.asarray(slope, dtype=float)
    R = float(radius)

    def F(x):
        x = np.asarray(x, dtype=float)
        q = np.clip(1.0 - np.sum(x * x, axis=-1) / R**2, 0.0, None)
        A = M + x[..., 0, None, None] * N
        return eps * (q**4)[..., None, None] * A

    def div(x):
        x = np.asarray(x, dtype=float)
        q = np.clip(1.0 - np.sum(x * x, axis=-1) / R**2, 0.0, None)
        A = M + x[..., 0, None, None] * N
        # d_j of q^4 is -8 q^3 x_j / R^2; d_j of x_1 N_ij is N_i1
        return eps * (np.einsum("...ij,...j->...i", A, -8.0 * (q**3)[..., None] * x / R**2) + (q**4)[..., None] * N[:, 0])

    return TensorForcing(
        F, gamma=0.5, support_radius=R, div=div, n_r=n_r, n_theta=n_theta, panel_width=min(1.0, R / 2.0)
    )


def algebraic_tensor(
    eps: float,
    matrix=((0.5, 1.0), (1.0, -0.5)),
    *,
    quad_radius: float = 1e4,
    n_r: int = 24,
    n_theta: int = 64,
    panel_width: float = 50.0,
) -> TensorForcing:
    """``F = eps S / ((1 + |x|^2) log(e + |x|^2))`` with symmetric ``S``.

    ``|x|^2 |F|`` tends to zero only logarithmically, so ``F`` has the
    critical decay without any power to spare.
    """
    S = np.asarray(matrix, dtype=float)
    if not np.allclose(S, S.T):
        raise ValueError("the algebraic family uses a symmetric matrix")

    def F(x):
        x = np.asarray(x, dtype=float)
        q = np.sum(x * x, axis=-1)
        return eps * (1.0 / ((1.0 + q) * np.log(np.e + q)))[..., None, None] * S

    def div(x):
        x = np.asarray(x, dtype=float)
        q = np.sum(x * x, axis=-1)
        L = np.log(np.e + q)
        dphi = -(L + (1.0 + q) / (np.e + q)) / ((1.0 + q) ** 2 * L**2)
        return eps * _apply(S, 2.0 * dphi[..., None] * x)

    return TensorForcing(
        F, gamma=0.0, quad_radius=quad_radius, div=div, n_r=n_r, n_theta=n_theta, panel_width=panel_width
    )


def compact_suite() -> list:
    """Five compactly supported tensors with differing symmetric and antisymmetric parts."""
    specs = [
        (((1.0, 0.0), (0.0, 1.0)), 1.0, ((0.0, 0.0), (0.0, 0.0))),
        (((0.0, 1.0), (-1.0, 0.0)), 1.0, ((0.5, 0.0), (0.0, 0.2))),
        (((0.3, 1.0), (-0.4, 0.2)), 1.5, ((0.0, 0.3), (-0.3, 0.0))),
        (((2.0, -0.7), (0.1, -1.0)), 0.75, ((1.0, 0.4), (0.0, -1.0))),
        (((0.0, 0.5), (0.0, 0.0)), 2.0, ((0.2, -0.2), (0.1, 0.0))),
    ]
    return [bump_tensor(1.0, m, r, n) for m, r, n in specs]
