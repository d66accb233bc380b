# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: ball stencils, screened matvec, tridiagonal solve.

Mirrors the API of ``segsolve._core_py``; ``segsolve.backend`` picks one of
the two at import time.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def apply_integral(ext, istart, ishape, steps, double weight):
    steps_c = np.ascontiguousarray(steps, dtype=np.int64)
    ext_c = np.ascontiguousarray(ext, dtype=np.float64)
    if ext_c.ndim == 1:
        return _integral_1d(ext_c, istart[0], ishape[0], steps_c, weight)
    return _integral_2d(ext_c, istart[0], istart[1], ishape[0], ishape[1], steps_c, weight)


def apply_sup(ext, istart, ishape, steps):
    steps_c = np.ascontiguousarray(steps, dtype=np.int64)
    ext_c = np.ascontiguousarray(ext, dtype=np.float64)
    if ext_c.ndim == 1:
        return _sup_1d(ext_c, istart[0], ishape[0], steps_c)
    return _sup_2d(ext_c, istart[0], istart[1], ishape[0], ishape[1], steps_c)


def screened_matvec(x, c, double h):
    x_c = np.ascontiguousarray(x, dtype=np.float64)
    c_c = np.ascontiguousarray(c, dtype=np.float64)
    if x_c.ndim == 1:
        return _matvec_1d(x_c, c_c, h)
    return _matvec_2d(x_c, c_c, h)


def thomas_spd(diag, double off, rhs):
    return _thomas(
        np.ascontiguousarray(diag, dtype=np.float64),
        off,
        np.ascontiguousarray(rhs, dtype=np.float64),
    )


cdef _integral_1d(double[::1] ext, Py_ssize_t i0, Py_ssize_t n,
                  long long[:, ::1] steps, double weight):
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, s, S = steps.shape[0]
    cdef double acc
    for k in range(n):
        acc = 0.0
        for s in range(S):
            acc += ext[i0 + k + steps[s, 0]]
        out[k] = acc * weight
    return out_arr


cdef _integral_2d(double[:, ::1] ext, Py_ssize_t i0, Py_ssize_t j0,
                  Py_ssize_t ni, Py_ssize_t nj, long long[:, ::1] steps,
                  double weight):
    out_arr = np.zeros((ni, nj))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t a, b, s, S = steps.shape[0]
    cdef double acc
    for a in range(ni):
        for b in range(nj):
            acc = 0.0
            for s in range(S):
                acc += ext[i0 + a + steps[s, 0], j0 + b + steps[s, 1]]
            out[a, b] = acc * weight
    return out_arr


cdef _sup_1d(double[::1] ext, Py_ssize_t i0, Py_ssize_t n,
             long long[:, ::1] steps):
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, s, S = steps.shape[0]
    cdef double best, v
    for k in range(n):
        best = ext[i0 + k + steps[0, 0]]
        for s in range(1, S):
            v = ext[i0 + k + steps[s, 0]]
            if v > best:
                best = v
        out[k] = best
    return out_arr


cdef _sup_2d(double[:, ::1] ext, Py_ssize_t i0, Py_ssize_t j0,
             Py_ssize_t ni, Py_ssize_t nj, long long[:, ::1] steps):
    out_arr = np.empty((ni, nj))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t a, b, s, S = steps.shape[0]
    cdef double best, v
    for a in range(ni):
        for b in range(nj):
            best = ext[i0 + a + steps[0, 0], j0 + b + steps[0, 1]]
            for s in range(1, S):
                v = ext[i0 + a + steps[s, 0], j0 + b + steps[s, 1]]
                if v > best:
                    best = v
            out[a, b] = best
    return out_arr


cdef _matvec_1d(double[::1] x, double[::1] c, double h):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double inv_h2 = 1.0 / (h * h)
    cdef Py_ssize_t k
    cdef double acc
    for k in range(n):
        acc = (2.0 * inv_h2 + c[k]) * x[k]
        if k > 0:
            acc -= inv_h2 * x[k - 1]
        if k < n - 1:
            acc -= inv_h2 * x[k + 1]
        out[k] = acc
    return out_arr


cdef _matvec_2d(double[:, ::1] x, double[:, ::1] c, double h):
    cdef Py_ssize_t ni = x.shape[0], nj = x.shape[1]
    out_arr = np.empty((ni, nj))
    cdef double[:, ::1] out = out_arr
    cdef double inv_h2 = 1.0 / (h * h)
    cdef Py_ssize_t a, b
    cdef double acc
    for a in range(ni):
        for b in range(nj):
            acc = (4.0 * inv_h2 + c[a, b]) * x[a, b]
            if a > 0:
                acc -= inv_h2 * x[a - 1, b]
            if a < ni - 1:
                acc -= inv_h2 * x[a + 1, b]
            if b > 0:
                acc -= inv_h2 * x[a, b - 1]
            if b < nj - 1:
                acc -= inv_h2 * x[a, b + 1]
            out[a, b] = acc
    return out_arr


cdef _thomas(double[::1] diag, double off, double[::1] rhs):
    cdef Py_ssize_t n = diag.shape[0]
    x_arr = np.empty(n)
    cdef double[::1] x = x_arr
    cp_arr = np.empty(n)
    dp_arr = np.empty(n)
    cdef double[::1] cp = cp_arr
    cdef double[::1] dp = dp_arr
    cdef Py_ssize_t i
    cdef double m
    cp[0] = off / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - off * cp[i - 1]
        cp[i] = off / m
        dp[i] = (rhs[i] - off * dp[i - 1]) / m
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x_arr
