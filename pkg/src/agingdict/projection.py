"""Per-group truncated-SVD bases mapping pixel space to the reduced space."""

from dataclasses import dataclass

import numpy as np


class ProjectionError(ValueError):
    pass


@dataclass
class ProjectionBasis:
    """Orthonormal ``H`` (f x m) for one group; ``offset`` is zero unless centred."""

    group: int
    H: np.ndarray
    offset: np.ndarray
    singular_values: np.ndarray = None

    @property
    def f(self):
        return self.H.shape[0]

    @property
    def m(self):
        return self.H.shape[1]

    def orthonormality_error(self):
        return float(np.abs(self.H.T @ self.H - np.eye(self.m)).max())


def fix_signs(U):
    """Flip columns so each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def _complete(U, count):
    """Append ``count`` orthonormal columns orthogonal to ``U`` (deterministic)."""
    f = U.shape[0]
    basis = [U[:, j] for j in range(U.shape[1])]
    residual = np.eye(f) - (U @ U.T if U.size else 0.0)
    while count:
        j = int(np.argmax(np.linalg.norm(residual, axis=0)))
        v = residual[:, j].copy()
        for u in basis:  # second pass keeps round-off orthogonal
            v -= (u @ v) * u
        v /= np.linalg.norm(v)
        basis.append(v)
        residual -= np.outer(v, v @ residual)
        count -= 1
    return np.column_stack(basis)


def left_singular(M):
    """Left singular vectors and singular values of ``M``, largest first.

    Works on whichever Gram matrix is smaller: ``M^T M`` when samples are
    fewer than pixels, ``M M^T`` otherwise.
    """
    f, s = M.shape
    if s <= f:
        evals, V = np.linalg.eigh(M.T @ M)
        order = np.argsort(evals)[::-1]
        evals, V = evals[order], V[:, order]
        sv = np.sqrt(np.clip(evals, 0.0, None))
        keep = sv > sv[0] * max(f, s) * np.finfo(float).eps if sv[0] > 0 else sv > 0
        U = (M @ V[:, keep]) / sv[keep]
    else:
        evals, U = np.linalg.eigh(M @ M.T)
        order = np.argsort(evals)[::-1][:s]
        evals, U = evals[order], U[:, order]
        sv = np.sqrt(np.clip(evals, 0.0, None))
        keep = sv > sv[0] * max(f, s) * np.finfo(float).eps if sv[0] > 0 else sv > 0
        U = U[:, keep]
    return U, sv


def fit_projection(samples, m, group=0, center=False, pad=False):
    """Leading ``m`` left singular vectors of the ``f x s`` sample matrix.

    With ``center`` the column mean is removed first and kept as the basis
    offset; by default the raw matrix is decomposed. ``m`` may exceed the
    sample count only with ``pad``: the basis is then completed with
    orthonormal directions that carry none of the samples' energy.
    """
    M = np.asarray(samples, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] < 1:
        raise ProjectionError("need an f x s matrix with s >= 1")
    f, s = M.shape
    if not 1 <= m <= (f if pad else min(f, s)):
        raise ProjectionError(f"m={m} exceeds min(f, s)={min(f, s)}")
    if not np.all(np.isfinite(M)):
        raise ProjectionError("non-finite samples")
    offset = M.mean(axis=1) if center else np.zeros(f)
    if center:
        M = M - offset[:, None]
    if not np.any(M):
        raise ProjectionError("no spectrum: all-zero sample matrix")
    U, sv = left_singular(M)
    U = U[:, :m]
    if U.shape[1] < m:
        U = _complete(U, m - U.shape[1])
    # one QR pass restores orthonormality lost through the Gram route
    Q, R = np.linalg.qr(U)
    Q *= np.where(np.diag(R) < 0, -1.0, 1.0)
    sv = np.concatenate([sv[:m], np.zeros(max(0, m - sv.size))])
    return ProjectionBasis(group, fix_signs(Q), offset, sv)


def project(basis, v):
    """``H^T (v - offset)`` for a vector or an ``f x n`` matrix."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != basis.f:
        raise ProjectionError(f"dimension mismatch: got {v.shape[0]}, basis has f={basis.f}")
    shift = basis.offset if v.ndim == 1 else basis.offset[:, None]
    return basis.H.T @ (v - shift)


def lift(basis, c):
    """``H c + offset`` for a vector or an ``m x n`` matrix."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] != basis.m:
        raise ProjectionError(f"dimension mismatch: got {c.shape[0]}, basis has m={basis.m}")
    shift = basis.offset if c.ndim == 1 else basis.offset[:, None]
    return basis.H @ c + shift
