# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integrands for the rotating Stokes kernel.

Mirrors ``_kernel_py``: the real-time integrand (plain and contracted
against quadrature weights) and the complex-``s`` samples of the far tail.
Output layouts are identical to the NumPy versions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, expm1, fabs, M_PI

cnp.import_array()

cdef int NSER = 24
cdef double C1[24]
cdef double C2[24]
cdef double C2D[23]


cdef double _fact(int n):
    cdef double f = 1.0
    cdef int i
    for i in range(2, n + 1):
        f *= i
    return f


cdef void _init_series():
    cdef int j
    cdef double sgn
    for j in range(NSER):
        sgn = 1.0 if j % 2 == 0 else -1.0
        C1[j] = sgn / _fact(j + 1)
        C2[j] = sgn * (j + 1) / _fact(j + 2)
    for j in range(NSER - 1):
        C2D[j] = C2[j + 1] * (j + 1)


_init_series()


cdef inline double _horner(double* c, int n, double z) nogil:
    cdef double acc = c[n - 1]
    cdef int i
    for i in range(n - 2, -1, -1):
        acc = acc * z + c[i]
    return acc


cdef inline void _phis(double z, double* p1, double* p2, double* p2d) nogil:
    cdef double e
    if fabs(z) < 1.0:
        p1[0] = _horner(C1, 24, z)
        p2[0] = _horner(C2, 24, z)
        p2d[0] = _horner(C2D, 23, z)
    else:
        e = exp(-z)
        p1[0] = -expm1(-z) / z
        p2[0] = (1.0 - (1.0 + z) * e) / (z * z)
        p2d[0] = (e - 2.0 * p2[0]) / z


def time_integrand(t, x, Y, double alpha, double lam, int parts=7, bint grad=False):
    """``exp(-lam t) O(a t)^T K(O(a t) x - y, t)`` flattened to ``(n, m*C)``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] yy = np.ascontiguousarray(Y, dtype=np.float64)
    cdef double x0 = float(x[0]), x1 = float(x[1])
    cdef Py_ssize_t n = tt.shape[0], m = yy.shape[0]
    cdef int C = 12 if grad else 4
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m * C), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[:] tv = tt
    cdef double[:, ::1] yv = yy
    cdef Py_ssize_t a, b, base
    cdef int k
    cdef double ti, s, c, sn, w, X1, X2, q, z, E, p1, p2, p2d
    cdef double diag, cxx, K11, K12, K22, Xk, dd, dxx, sym, d11, d12, d22
    cdef double fp = 4.0 * M_PI
    cdef bint useG = parts & 1, useH11 = parts & 2, useH12 = parts & 4
    with nogil:
        for a in range(n):
            ti = tv[a]
            s = 1.0 / ti
            c = cos(alpha * ti)
            sn = sin(alpha * ti)
            w = exp(-lam * ti) * s
            for b in range(m):
                X1 = c * x0 - sn * x1 - yv[b, 0]
                X2 = sn * x0 + c * x1 - yv[b, 1]
                q = X1 * X1 + X2 * X2
                z = 0.25 * q * s
                _phis(z, &p1, &p2, &p2d)
                E = exp(-z)
                diag = 0.0
                cxx = 0.0
                if useG:
                    diag += E / fp
                if useH11:
                    cxx = p2 * s / (4.0 * fp)
                if useH12:
                    diag -= p1 / (2.0 * fp)
                K11 = diag + cxx * X1 * X1
                K12 = cxx * X1 * X2
                K22 = diag + cxx * X2 * X2
                base = b * C
                o[a, base + 0] = w * (c * K11 + sn * K12)
                o[a, base + 1] = w * (c * K12 + sn * K22)
                o[a, base + 2] = w * (-sn * K11 + c * K12)
                o[a, base + 3] = w * (-sn * K12 + c * K22)
                if grad:
                    for k in range(2):
                        Xk = X1 if k == 0 else X2
                        dd = 0.0
                        if useG:
                            dd -= E * Xk * s / (2.0 * fp)
                        if useH12:
                            dd += p2 * Xk * s / (4.0 * fp)
                        dxx = 0.0
                        sym = 0.0
                        if useH11:
                            dxx = p2d * Xk * s * s / (8.0 * fp)
                            sym = p2 * s / (4.0 * fp)
                        if k == 0:
                            d11 = dd + dxx * X1 * X1 + 2.0 * X1 * sym
                            d12 = dxx * X1 * X2 + sym * X2
                            d22 = dd + dxx * X2 * X2
                        else:
                            d11 = dd + dxx * X1 * X1
                            d12 = dxx * X1 * X2 + sym * X1
                            d22 = dd + dxx * X2 * X2 + 2.0 * X2 * sym
                        o[a, base + 4 + 4 * k] = -w * (c * d11 + sn * d12)
                        o[a, base + 5 + 4 * k] = -w * (c * d12 + sn * d22)
                        o[a, base + 6 + 4 * k] = -w * (-sn * d11 + c * d12)
                        o[a, base + 7 + 4 * k] = -w * (-sn * d12 + c * d22)
    return out


cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double cabs(double complex)


cdef inline void _phis_c(double complex z, double complex* p1, double complex* p2, double complex* p2d) nogil:
    cdef double complex e, a1, a2, a3, iz
    cdef int i
    if cabs(z) < 0.5:
        a1 = C1[16]
        a2 = C2[16]
        a3 = C2D[16]
        for i in range(15, -1, -1):
            a1 = a1 * z + C1[i]
            a2 = a2 * z + C2[i]
            a3 = a3 * z + C2D[i]
        p1[0] = a1
        p2[0] = a2
        p2d[0] = a3
    else:
        e = cexp(-z)
        iz = z.conjugate() * (1.0 / (z.real * z.real + z.imag * z.imag))
        p1[0] = (1.0 - e) * iz
        p2[0] = (1.0 - (1.0 + z) * e) * iz * iz
        p2d[0] = (e - 2.0 * p2[0]) * iz


def tail_samples_contracted(theta, s, x, Y, int parts, bint grad, W):
    """``sum_{b,c} W[b, c, p] (O^T t K)(theta_a, s_a; y_b)[c]`` for complex ``s``; shape ``(n, P)``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] ss = np.ascontiguousarray(s, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] yy = np.ascontiguousarray(Y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] ww = np.ascontiguousarray(W, dtype=np.float64)
    cdef double x0 = float(x[0]), x1 = float(x[1])
    cdef Py_ssize_t n = th.shape[0], m = yy.shape[0], P = ww.shape[2]
    cdef int C = 12 if grad else 4
    if ww.shape[0] != m or ww.shape[1] != C:
        raise ValueError("weight tensor has the wrong shape")
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out = np.zeros((n, P), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double[:] tv = th
    cdef double complex[:] sv = ss
    cdef double[:, ::1] yv = yy
    cdef double[:, :, ::1] wv = ww
    cdef Py_ssize_t a, b, p
    cdef int k, cc
    cdef double c, sn, X1, X2, q, Xk
    cdef double complex sc, z, E, p1, p2, p2d, diag, cxx, K11, K12, K22, dd, dxx, sym, d11, d12, d22
    cdef double complex vals[12]
    cdef double ifp = 1.0 / (4.0 * M_PI)
    cdef bint useG = parts & 1, useH11 = parts & 2, useH12 = parts & 4
    with nogil:
        for a in range(n):
            sc = sv[a]
            c = cos(tv[a])
            sn = sin(tv[a])
            for b in range(m):
                X1 = c * x0 - sn * x1 - yv[b, 0]
                X2 = sn * x0 + c * x1 - yv[b, 1]
                q = X1 * X1 + X2 * X2
                z = 0.25 * q * sc
                _phis_c(z, &p1, &p2, &p2d)
                E = cexp(-z)
                diag = 0.0
                cxx = 0.0
                if useG:
                    diag = diag + E * ifp
                if useH11:
                    cxx = p2 * sc * (0.25 * ifp)
                if useH12:
                    diag = diag - p1 * (0.5 * ifp)
                K11 = diag + cxx * X1 * X1
                K12 = cxx * X1 * X2
                K22 = diag + cxx * X2 * X2
                vals[0] = c * K11 + sn * K12
                vals[1] = c * K12 + sn * K22
                vals[2] = -sn * K11 + c * K12
                vals[3] = -sn * K12 + c * K22
                if grad:
                    for k in range(2):
                        Xk = X1 if k == 0 else X2
                        dd = 0.0
                        if useG:
                            dd = dd - E * Xk * sc * (0.5 * ifp)
                        if useH12:
                            dd = dd + p2 * Xk * sc * (0.25 * ifp)
                        dxx = 0.0
                        sym = 0.0
                        if useH11:
                            dxx = p2d * Xk * sc * sc * (0.125 * ifp)
                            sym = p2 * sc * (0.25 * ifp)
                        if k == 0:
                            d11 = dd + dxx * X1 * X1 + 2.0 * X1 * sym
                            d12 = dxx * X1 * X2 + sym * X2
                            d22 = dd + dxx * X2 * X2
                        else:
                            d11 = dd + dxx * X1 * X1
                            d12 = dxx * X1 * X2 + sym * X1
                            d22 = dd + dxx * X2 * X2 + 2.0 * X2 * sym
                        vals[4 + 4 * k] = -(c * d11 + sn * d12)
                        vals[5 + 4 * k] = -(c * d12 + sn * d22)
                        vals[6 + 4 * k] = -(-sn * d11 + c * d12)
                        vals[7 + 4 * k] = -(-sn * d12 + c * d22)
                for p in range(P):
                    for cc in range(C):
                        o[a, p] = o[a, p] + wv[b, cc, p] * vals[cc]
    return out


def time_integrand_contracted(t, x, Y, double alpha, double lam, int parts, bint grad, W):
    """Real-time integrand contracted against ``W[b, c, p]``; shape ``(n, P)``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] yy = np.ascontiguousarray(Y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] ww = np.ascontiguousarray(W, dtype=np.float64)
    cdef double x0 = float(x[0]), x1 = float(x[1])
    cdef Py_ssize_t n = tt.shape[0], m = yy.shape[0], P = ww.shape[2]
    cdef int C = 12 if grad else 4
    if ww.shape[0] != m or ww.shape[1] != C:
        raise ValueError("weight tensor has the wrong shape")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, P), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[:] tv = tt
    cdef double[:, ::1] yv = yy
    cdef double[:, :, ::1] wv = ww
    cdef Py_ssize_t a, b, p
    cdef int k, cc
    cdef double ti, sc, c, sn, wt, X1, X2, q, Xk, z, E, p1, p2, p2d
    cdef double diag, cxx, K11, K12, K22, dd, dxx, sym, d11, d12, d22
    cdef double vals[12]
    cdef double ifp = 1.0 / (4.0 * M_PI)
    cdef bint useG = parts & 1, useH11 = parts & 2, useH12 = parts & 4
    with nogil:
        for a in range(n):
            ti = tv[a]
            sc = 1.0 / ti
            c = cos(alpha * ti)
            sn = sin(alpha * ti)
            wt = exp(-lam * ti) * sc
            for b in range(m):
                X1 = c * x0 - sn * x1 - yv[b, 0]
                X2 = sn * x0 + c * x1 - yv[b, 1]
                q = X1 * X1 + X2 * X2
                z = 0.25 * q * sc
                _phis(z, &p1, &p2, &p2d)
                E = exp(-z)
                diag = 0.0
                cxx = 0.0
                if useG:
                    diag = diag + E * ifp
                if useH11:
                    cxx = p2 * sc * (0.25 * ifp)
                if useH12:
                    diag = diag - p1 * (0.5 * ifp)
                K11 = diag + cxx * X1 * X1
                K12 = cxx * X1 * X2
                K22 = diag + cxx * X2 * X2
                vals[0] = c * K11 + sn * K12
                vals[1] = c * K12 + sn * K22
                vals[2] = -sn * K11 + c * K12
                vals[3] = -sn * K12 + c * K22
                if grad:
                    for k in range(2):
                        Xk = X1 if k == 0 else X2
                        dd = 0.0
                        if useG:
                            dd = dd - E * Xk * sc * (0.5 * ifp)
                        if useH12:
                            dd = dd + p2 * Xk * sc * (0.25 * ifp)
                        dxx = 0.0
                        sym = 0.0
                        if useH11:
                            dxx = p2d * Xk * sc * sc * (0.125 * ifp)
                            sym = p2 * sc * (0.25 * ifp)
                        if k == 0:
                            d11 = dd + dxx * X1 * X1 + 2.0 * X1 * sym
                            d12 = dxx * X1 * X2 + sym * X2
                            d22 = dd + dxx * X2 * X2
                        else:
                            d11 = dd + dxx * X1 * X1
                            d12 = dxx * X1 * X2 + sym * X1
                            d22 = dd + dxx * X2 * X2 + 2.0 * X2 * sym
                        vals[4 + 4 * k] = -(c * d11 + sn * d12)
                        vals[5 + 4 * k] = -(c * d12 + sn * d22)
                        vals[6 + 4 * k] = -(-sn * d11 + c * d12)
                        vals[7 + 4 * k] = -(-sn * d12 + c * d22)
                for p in range(P):
                    for cc in range(C):
                        o[a, p] = o[a, p] + wt * wv[b, cc, p] * vals[cc]
    return out
