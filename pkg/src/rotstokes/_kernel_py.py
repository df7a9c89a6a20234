"""Pure NumPy evaluation of the rotated heat-kernel integrand.

Shared by the compiled core (which implements only the real-time hot
loop) and used directly for the complex-time samples of the far tail.
"""

from __future__ import annotations

import math

import numpy as np

PART_G = 1
PART_H11 = 2
PART_H12 = 4
PART_ALL = PART_G | PART_H11 | PART_H12

_FOUR_PI = 4.0 * math.pi

# Series coefficients: phi1 = sum (-1)^j z^j/(j+1)!, phi2 = sum (-1)^j (j+1) z^j/(j+2)!
_NSER = 24
_C1 = np.array([(-1.0) ** j / math.factorial(j + 1) for j in range(_NSER)])
_C2 = np.array([(-1.0) ** j * (j + 1) / math.factorial(j + 2) for j in range(_NSER)])
_C2D = np.array([_C2[j + 1] * (j + 1) for j in range(_NSER - 1)])


def _horner(coef, z):
    acc = np.full_like(z, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * z + c
    return acc


def phi_functions(z):
    """``phi1 = (1-e^-z)/z``, ``phi2 = (1-(1+z)e^-z)/z^2`` and ``phi2'``.

    Works for real ``z >= 0`` of any size and for complex ``z`` of moderate
    modulus; a power series replaces the closed forms near ``z = 0``.
    """
    z = np.asarray(z)
    small = np.abs(z) < 1.0
    zs = np.where(small, z, 0.0)
    zl = np.where(small, 1.0, z)
    e = np.exp(-zl)
    p1 = np.where(small, _horner(_C1, zs), -np.expm1(-zl) / zl)
    p2_l = (1.0 - (1.0 + zl) * e) / (zl * zl)
    p2 = np.where(small, _horner(_C2, zs), p2_l)
    p2d = np.where(small, _horner(_C2D, zs), (e - 2.0 * p2_l) / zl)
    return p1, p2, p2d


def tk_values(theta, s, x, Y, parts: int = PART_ALL, grad: bool = False):
    """``O(theta)^T t K(O(theta) x - y, t)`` at ``t = 1/s`` for every ``y`` in ``Y``.

    ``theta`` and ``s`` are 1-D of equal length ``n`` (``s`` may be
    complex).  Returns shape ``(n, m, C)`` with ``C = 4`` (entries ``ij``
    row-major) or ``C = 12`` when ``grad`` adds ``d/dy_1`` then ``d/dy_2``
    of every entry.
    """
    theta = np.asarray(theta, dtype=float)[:, None]
    s = np.asarray(s)[:, None]
    Y = np.asarray(Y, dtype=float)
    c, sn = np.cos(theta), np.sin(theta)
    X1 = c * x[0] - sn * x[1] - Y[None, :, 0]
    X2 = sn * x[0] + c * x[1] - Y[None, :, 1]
    q = X1 * X1 + X2 * X2
    z = 0.25 * q * s
    p1, p2, p2d = phi_functions(z)
    E = np.exp(-z)
    diag = np.zeros_like(z)
    coef_xx = np.zeros_like(z)
    if parts & PART_G:
        diag = diag + E / _FOUR_PI
    if parts & PART_H11:
        coef_xx = p2 * s / (4.0 * _FOUR_PI)
    if parts & PART_H12:
        diag = diag - p1 / (2.0 * _FOUR_PI)
    K11 = diag + coef_xx * X1 * X1
    K12 = coef_xx * X1 * X2
    K22 = diag + coef_xx * X2 * X2
    # O^T K with O^T = [[c, s], [-s, c]]
    nb = 12 if grad else 4
    out = np.empty(z.shape + (nb,), dtype=np.result_type(z, float))
    out[..., 0] = c * K11 + sn * K12
    out[..., 1] = c * K12 + sn * K22
    out[..., 2] = -sn * K11 + c * K12
    out[..., 3] = -sn * K12 + c * K22
    if grad:
        # t dK/dX_k; the y-gradient carries an extra minus sign.
        for k, Xk in enumerate((X1, X2)):
            dd = np.zeros_like(z)
            if parts & PART_G:
                dd = dd - E * Xk * s / (2.0 * _FOUR_PI)
            if parts & PART_H12:
                dd = dd + p2 * Xk * s / (4.0 * _FOUR_PI)
            dxx = np.zeros_like(z)
            sym = np.zeros_like(z)
            if parts & PART_H11:
                dxx = p2d * Xk * s * s / (8.0 * _FOUR_PI)
                sym = p2 * s / (4.0 * _FOUR_PI)
            # d/dX_k of X_i X_j = delta_ik X_j + X_i delta_jk
            d11 = dd + dxx * X1 * X1 + (2.0 * X1 * sym if k == 0 else 0.0)
            d12 = dxx * X1 * X2 + (sym * X2 if k == 0 else sym * X1)
            d22 = dd + dxx * X2 * X2 + (2.0 * X2 * sym if k == 1 else 0.0)
            base = 4 + 4 * k
            out[..., base + 0] = -(c * d11 + sn * d12)
            out[..., base + 1] = -(c * d12 + sn * d22)
            out[..., base + 2] = -(-sn * d11 + c * d12)
            out[..., base + 3] = -(-sn * d12 + c * d22)
    return out


def time_integrand(t, x, Y, alpha: float, lam: float, parts: int = PART_ALL, grad: bool = False):
    """Real-time integrand ``exp(-lam t) O(a t)^T K(O(a t) x - y, t)``, flattened to ``(n, m*C)``."""
    t = np.asarray(t, dtype=float)
    vals = tk_values(alpha * t, 1.0 / t, x, Y, parts, grad)
    w = np.exp(-lam * t) / t
    return (vals * w[:, None, None]).reshape(len(t), -1)


def tail_samples_contracted(theta, s, x, Y, parts, grad, W, chunk=64):
    """``sum_{b,c} W[b, c, p] tk_values(theta, s)[:, b, c]``, shape ``(n, P)``."""
    W = np.asarray(W, dtype=float)
    out = np.zeros((len(theta), W.shape[2]), dtype=complex)
    for lo in range(0, len(Y), chunk):
        vals = tk_values(theta, s, x, Y[lo : lo + chunk], parts, grad)
        out += np.einsum("nmc,mcp->np", vals, W[lo : lo + chunk])
    return out


def time_integrand_contracted(t, x, Y, alpha, lam, parts, grad, W):
    t = np.asarray(t, dtype=float)
    res = tail_samples_contracted(alpha * t, (1.0 / t).astype(complex), x, Y, parts, grad, W).real
    return res * (np.exp(-lam * t) / t)[:, None]
