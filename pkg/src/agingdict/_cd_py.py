"""Pure NumPy coordinate-descent Lasso kernel.

Reference implementation of the compiled kernel in ``_cd_ext.pyx``. Both
solve, column by column,

    min_a ||t - Phi a||_2^2 + lam * ||a||_1

in Gram form, given ``Q = Phi^T Phi`` and ``b = Phi^T t``. The coordinate
order and update arithmetic match the compiled kernel; the two differ only in
how the starting gradient is summed.
"""

import numpy as np


def kkt_violation(g, a, lam):
    """Largest subgradient-optimality violation for gradient ``g = Q a - b``."""
    worst = 0.0
    for j in range(a.shape[0]):
        gj2 = 2.0 * g[j]
        if a[j] > 0.0:
            v = abs(gj2 + lam)
        elif a[j] < 0.0:
            v = abs(gj2 - lam)
        else:
            v = abs(gj2) - lam
        if v > worst:
            worst = v
    return worst


def lasso_gram(Q, b, lam, a, tol, max_sweeps, callback=None):
    """Cyclic coordinate descent on one column, updating ``a`` in place.

    ``callback(j, a)`` is invoked after every coordinate update when given.
    Returns ``(sweeps, converged)``.
    """
    k = a.shape[0]
    half = 0.5 * lam
    g = Q @ a - b
    if kkt_violation(g, a, lam) <= tol:
        return 0, True
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
                g += d * Q[:, j]
            if callback is not None:
                callback(j, a)
        if kkt_violation(g, a, lam) <= tol:
            return sweep, True
    return max_sweeps, False


def lasso_gram_batch(Q, B, lam, A, tol, max_sweeps):
    """Solve every column of ``B`` (k x n); ``A`` (k x n) is the warm start, updated in place."""
    n = B.shape[1]
    sweeps = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    for i in range(n):
        col = A[:, i].copy()
        sweeps[i], converged[i] = lasso_gram(Q, B[:, i], lam, col, tol, max_sweeps)
        A[:, i] = col
    return sweeps, converged
