# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GRDR chain kernel.

Mirrors :func:`grdr._fallback.run_chains`; both consume the same pre-drawn
variates so the two backends agree up to floating-point summation order.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()


cdef inline double _payoff(int code, const double* coef, const double* drift,
                           double scalar, const double* x, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    if code == 0:
        return scalar
    if code == 1:
        for i in range(d):
            s += coef[i] * x[i]
        return s
    for i in range(d):
        s += exp(drift[i] + coef[i] * x[i])
    s = s / d - scalar
    return s if s > 0.0 else 0.0


cdef inline void _matvec(const double[::1, :] A, const double* u, double* out,
                         Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double uj
    for i in range(d):
        out[i] = 0.0
    for j in range(d):
        uj = u[j]
        for i in range(d):
            out[i] += A[i, j] * uj


def run_chains(const double[::1, :] A, int code, const double[::1] coef,
               const double[::1] drift, double scalar, const double[:, ::1] U0,
               const cnp.int64_t[:, ::1] depths, const double[::1] fresh,
               const cnp.int64_t[::1] offsets, bint verify=False):
    """Run one chain per row of ``U0``; return ``(f_n values, max verify error)``.

    ``A`` must be Fortran-ordered so each column is contiguous. Chain ``b``
    reads its fresh variates from ``fresh[offsets[b]:]`` in iteration order.
    """
    cdef Py_ssize_t B = U0.shape[0]
    cdef Py_ssize_t d = A.shape[0]
    cdef Py_ssize_t m = depths.shape[1]
    cdef Py_ssize_t b, k, j, i, N, pos
    cdef double S, delta, err, unorm, afro = 0.0, worst = 0.0
    cdef double[::1] out = np.empty(B)
    cdef double[::1] X = np.empty(d)
    cdef double[::1] U = np.empty(d)
    cdef double[::1] R = np.empty(d)
    cdef const double* col

    if verify:
        for j in range(d):
            for i in range(d):
                afro += A[i, j] * A[i, j]
        afro = sqrt(afro)

    with nogil:
        for b in range(B):
            for j in range(d):
                U[j] = U0[b, j]
            _matvec(A, &U[0], &X[0], d)
            S = _payoff(code, &coef[0], &drift[0], scalar, &X[0], d)
            pos = offsets[b]
            for k in range(m):
                N = depths[b, k]
                for j in range(N):
                    delta = fresh[pos + j] - U[j]
                    U[j] = fresh[pos + j]
                    col = &A[0, j]
                    for i in range(d):
                        X[i] += col[i] * delta
                pos += N
                S += _payoff(code, &coef[0], &drift[0], scalar, &X[0], d)
                if verify:
                    _matvec(A, &U[0], &R[0], d)
                    err = 0.0
                    unorm = 0.0
                    for i in range(d):
                        err += (X[i] - R[i]) * (X[i] - R[i])
                        unorm += U[i] * U[i]
                    err = sqrt(err) / (afro * sqrt(unorm) + 1e-300)
                    if err > worst:
                        worst = err
            out[b] = S / (m + 1)
    return np.asarray(out), worst
