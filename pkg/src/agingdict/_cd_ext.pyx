# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordinate-descent Lasso kernel (see ``_cd_py`` for the reference)."""

import numpy as np

from libc.math cimport fabs


cdef double _kkt(const double[:, ::1] Q, double[::1] g, double[::1] a,
                 double lam) noexcept nogil:
    cdef Py_ssize_t j, k = a.shape[0]
    cdef double v, gj2, worst = 0.0
    for j in range(k):
        gj2 = 2.0 * g[j]
        if a[j] > 0.0:
            v = fabs(gj2 + lam)
        elif a[j] < 0.0:
            v = fabs(gj2 - lam)
        else:
            v = fabs(gj2) - lam
        if v > worst:
            worst = v
    return worst


cdef int _solve(const double[:, ::1] Q, const double[::1] b, double lam,
                double[::1] a, double[::1] g, double tol, int max_sweeps,
                int* converged) noexcept nogil:
    cdef Py_ssize_t i, j, k = a.shape[0]
    cdef int sweep
    cdef double q, aj, rho, new, d, acc
    cdef double half = 0.5 * lam

    # g = Q a - b, accumulated in the same order as a BLAS-free matvec
    for i in range(k):
        acc = 0.0
        for j in range(k):
            acc = acc + Q[i, j] * a[j]
        g[i] = acc - b[i]
    if _kkt(Q, g, a, lam) <= tol:
        converged[0] = 1
        return 0
    for sweep in range(1, max_sweeps + 1):
        for j in range(k):
            q = Q[j, j]
            aj = a[j]
            if q <= 0.0:
                new = 0.0
            else:
                rho = q * aj - g[j]
                if rho > half:
                    new = (rho - half) / q
                elif rho < -half:
                    new = (rho + half) / q
                else:
                    new = 0.0
            d = new - aj
            if d != 0.0:
                a[j] = new
                # Q is symmetric: row j equals column j
                for i in range(k):
                    g[i] = g[i] + d * Q[j, i]
        if _kkt(Q, g, a, lam) <= tol:
            converged[0] = 1
            return sweep
    converged[0] = 0
    return max_sweeps


def lasso_gram_batch(Q, B, double lam, A, double tol, int max_sweeps):
    """Solve every column of ``B`` (k x n); ``A`` (k x n) is the warm start, updated in place."""
    cdef double[:, ::1] Qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef double[:, ::1] Bt = np.ascontiguousarray(np.asarray(B, dtype=np.float64).T)
    cdef double[:, ::1] At = np.ascontiguousarray(np.asarray(A, dtype=np.float64).T)
    cdef Py_ssize_t n = Bt.shape[0], k = Bt.shape[1], i
    cdef double[::1] g = np.empty(k, dtype=np.float64)
    sweeps_arr = np.zeros(n, dtype=np.int64)
    conv_arr = np.zeros(n, dtype=np.int32)
    cdef long long[::1] sweeps = sweeps_arr
    cdef int[::1] conv = conv_arr
    cdef int flag
    with nogil:
        for i in range(n):
            sweeps[i] = _solve(Qv, Bt[i], lam, At[i], g, tol, max_sweeps, &flag)
            conv[i] = flag
    A[...] = np.asarray(At).T
    return sweeps_arr, conv_arr.astype(bool)
