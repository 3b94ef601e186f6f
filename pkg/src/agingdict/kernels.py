"""Backend selection for the coordinate-descent hot loop.

The compiled Cython kernel is used when it was built; otherwise the NumPy
reference in :mod:`agingdict._cd_py` is used. Setting ``AGINGDICT_PURE=1``
forces the fallback.
"""

import os

from agingdict import _cd_py

BACKENDS = {"python": _cd_py.lasso_gram_batch}

try:
    from agingdict import _cd_ext
except ImportError:  # extension not built
    _cd_ext = None
else:
    BACKENDS["cython"] = _cd_ext.lasso_gram_batch

if os.environ.get("AGINGDICT_PURE", "") not in ("", "0") or _cd_ext is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def lasso_gram_batch(Q, B, lam, A, tol, max_sweeps, backend=None):
    """Dispatch to the selected backend; see :func:`agingdict._cd_py.lasso_gram_batch`."""
    return BACKENDS[backend or BACKEND](Q, B, lam, A, tol, max_sweeps)
