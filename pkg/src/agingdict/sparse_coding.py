"""Lasso solves for the sparse codes shared by neighbouring age groups.

The penalty is used exactly as ``||t - Phi a||^2 + lam ||a||_1``: no 1/2 on
the quadratic term and no scaling by the number of rows.
"""

from dataclasses import dataclass

import numpy as np

from agingdict import kernels

DEFAULT_TOL = 1e-7


class ShapeError(ValueError):
    pass


@dataclass
class LassoResult:
    coef: np.ndarray
    sweeps: int
    converged: bool


@dataclass
class SparseCodeBatch:
    """Codes ``A`` (k x n) for one bridge, plus per-column solver status."""

    A: np.ndarray
    bridge: int
    sweeps: np.ndarray
    converged: np.ndarray

    @property
    def all_converged(self):
        return bool(np.all(self.converged))


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def lasso_objective(design, target, a, lam):
    r = target - design @ a
    return float(r @ r + lam * np.abs(a).sum())


def kkt_residual(design, target, a, lam):
    """Worst violation of the subgradient conditions of :func:`lasso_objective`."""
    grad = 2.0 * design.T @ (design @ a - target)
    nz = a != 0
    viol = np.where(nz, np.abs(grad + lam * np.sign(a)), np.abs(grad) - lam)
    return float(max(viol.max(initial=0.0), 0.0))


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite input")


def default_max_iter(k):
    return 10 * k


POLISH_EVERY = 50  # sweeps between attempts to finish a column exactly


def _reduced_solve(Q, b, lam, S, signs):
    # None when Q_SS is singular to working precision
    try:
        L = np.linalg.cholesky(Q[np.ix_(S, S)])
    except np.linalg.LinAlgError:
        return None
    d = np.diag(L)
    if d.min() <= 1e-7 * d.max():
        return None
    y = np.linalg.solve(L, b[S] - 0.5 * lam * signs)
    return np.linalg.solve(L.T, y)


def _support_candidates(Q, b, lam, a):
    S = np.flatnonzero(a)
    if S.size == 0:
        return
    x = _reduced_solve(Q, b, lam, S, np.sign(a[S]))
    if x is not None:
        yield S, x
        return
    # singular on S: some atom is still on its way out
    for i in np.argsort(np.abs(a[S]), kind="stable"):
        T = np.delete(S, i)
        if T.size:
            x = _reduced_solve(Q, b, lam, T, np.sign(a[T]))
            if x is not None:
                yield T, x


def _polish(Q, b, lam, a, tol):
    """Exact minimiser on the current support and signs, or ``None``.

    Coordinate descent finds the active set long before the values settle on
    badly conditioned problems. Solving the reduced optimality system
    ``Q_SS a_S = b_S - (lam/2) sign(a_S)`` finishes the column. If ``Q_SS`` is
    singular, supports with one atom removed (smallest magnitude first) are
    tried instead. A candidate is kept only if it satisfies the full KKT
    conditions within ``tol`` and does not increase the objective.
    """
    value = lambda v: v @ (Q @ v) - 2.0 * (b @ v) + lam * np.abs(v).sum()
    for T, x in _support_candidates(Q, b, lam, a):
        if np.any(np.sign(x) != np.sign(a[T])):
            continue
        cand = np.zeros_like(a)
        cand[T] = x
        g2 = 2.0 * (Q @ cand - b)
        viol = np.where(cand != 0, np.abs(g2 + lam * np.sign(cand)), np.abs(g2) - lam)
        if viol.max(initial=0.0) <= tol and value(cand) <= value(a):
            return cand
    return None


def _solve_gram(Q, B, lam, A, tol, max_iter, backend):
    """Coordinate descent in chunks of ``POLISH_EVERY`` sweeps with a polish between chunks.

    Updates ``A`` in place; returns per-column ``(sweeps, converged)``.
    """
    n = B.shape[1]
    sweeps = np.zeros(n, dtype=np.int64)
    conv = np.zeros(n, dtype=bool)
    active = np.arange(n)
    done = 0
    while True:
        chunk = min(POLISH_EVERY, max_iter - done)
        sub = np.ascontiguousarray(A[:, active])
        s, c = kernels.lasso_gram_batch(Q, np.ascontiguousarray(B[:, active]), lam, sub, tol, chunk,
                                        backend=backend)
        A[:, active] = sub
        sweeps[active] += s
        conv[active] = c
        done += chunk
        for i in active[~c]:
            cand = _polish(Q, B[:, i], lam, A[:, i], tol)
            if cand is not None:
                A[:, i] = cand
                conv[i] = True
        active = np.flatnonzero(~conv)
        if active.size == 0 or done >= max_iter:
            return sweeps, conv


def solve_lasso(design, target, lam, tol=DEFAULT_TOL, max_iter=None, init=None, backend=None):
    """Minimise ``||target - design a||^2 + lam ||a||_1`` by cyclic coordinate descent.

    ``max_iter`` counts full sweeps over the k coordinates (default ``10 k``).
    Every ``POLISH_EVERY`` sweeps an unconverged column is offered an exact
    solve on its current support (see :func:`_polish`).
    Running out of sweeps is not an error: the last iterate is returned with
    ``converged=False``.
    """
    design = np.asarray(design, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if design.ndim != 2 or design.size == 0:
        raise ShapeError("design must be a non-empty matrix")
    if target.shape != (design.shape[0],):
        raise ShapeError(f"target has shape {target.shape}, expected ({design.shape[0]},)")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    _check_finite(design, target)
    k = design.shape[1]
    a = np.zeros((k, 1)) if init is None else np.array(init, dtype=np.float64).reshape(k, 1)
    sweeps, conv = _solve_gram(
        design.T @ design, (design.T @ target).reshape(k, 1), float(lam), a, float(tol),
        int(max_iter if max_iter is not None else default_max_iter(k)), backend,
    )
    return LassoResult(a[:, 0], int(sweeps[0]), bool(conv[0]))


def solve_coupled_codes(W_young, W_old, U, V, lam, bridge=0, tol=DEFAULT_TOL, max_iter=None,
                        init=None, backend=None):
    """Column-wise Lasso on the stacked system ``[U; V] ~ [W_young; W_old] A``.

    ``U`` and ``V`` are the reduced-space targets (data minus personalised
    layer) of the younger and older side. ``init`` warm-starts the solve.
    """
    W_young = np.asarray(W_young, dtype=np.float64)
    W_old = np.asarray(W_old, dtype=np.float64)
    if W_young.shape[1] != W_old.shape[1]:
        raise ShapeError("dictionaries disagree on the number of atoms")
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    if U.shape[0] != W_young.shape[0] or V.shape[0] != W_old.shape[0] or U.shape[1] != V.shape[1]:
        raise ShapeError(f"target shapes {U.shape}, {V.shape} do not match dictionaries")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    _check_finite(W_young, W_old, U, V)
    k = W_young.shape[1]
    n = U.shape[1]
    Q = W_young.T @ W_young + W_old.T @ W_old
    B = W_young.T @ U + W_old.T @ V
    A = np.zeros((k, n)) if init is None else np.array(init, dtype=np.float64, copy=True)
    if A.shape != (k, n):
        raise ShapeError(f"warm start has shape {A.shape}, expected {(k, n)}")
    sweeps, conv = _solve_gram(
        Q, B, float(lam), A, float(tol),
        int(max_iter if max_iter is not None else default_max_iter(k)), backend,
    )
    return SparseCodeBatch(A, bridge, sweeps, conv)
