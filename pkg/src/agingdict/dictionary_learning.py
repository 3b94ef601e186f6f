"""Coupled aging-dictionary learning by alternating block minimisation.

Every bridge g pairs younger faces ``X^g`` (group g) with older faces ``Y^g``
(group g+1) of the same subjects. One code matrix ``A^g`` and one
personalised layer ``P^g`` are shared by both sides, which couples the
neighbouring dictionaries ``D^g`` and ``D^{g+1}``. After the per-group
projection all algebra happens in the reduced space; the objective is

    sum_g ||X~^g - D^g A^g - P^g||_F^2 + ||Y~^g - D^{g+1} A^g - P^g||_F^2
          + gamma ||P^g||_F^2 + lam ||A^g||_1

subject to every dictionary column lying in the unit ball. Groups and
bridges are 0-based here.
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from agingdict.dataset import DatasetDims, compute_average_faces
from agingdict.projection import fit_projection, project
from agingdict.sparse_coding import DEFAULT_TOL, solve_coupled_codes

log = logging.getLogger(__name__)

RIDGE = 1e-8
NORM_SLACK = 1e-10


class TrainingError(ValueError):
    pass


@dataclass
class HyperParams:
    lam: float = 0.01
    gamma: float = 0.1
    k: int = 70
    m: int = None  # default per dataset: min(100, smallest group size, f)
    max_outer_iter: int = 60
    rel_tol: float = 1e-4
    rng_seed: int = 0
    center: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise TrainingError("lambda must be >= 0")
        if not self.gamma >= 0:
            raise TrainingError("gamma must be >= 0")
        if self.k < 1:
            raise TrainingError("k must be >= 1")
        if self.m is not None and self.m < 1:
            raise TrainingError("m must be >= 1")
        if self.max_outer_iter < 1:
            raise TrainingError("max_outer_iter must be >= 1")
        if not self.rel_tol >= 0:
            raise TrainingError("rel_tol must be >= 0")

    def resolve(self, bundle):
        """Fill in ``m`` from the data when it was left unset.

        An explicit ``m`` above a group's sample count is allowed (the basis
        of that group is padded) but not above ``f``.
        """
        smallest = min(bundle.group_samples(g).shape[1] for g in range(bundle.dims.G))
        m = min(100, smallest, bundle.dims.f) if self.m is None else self.m
        if m > bundle.dims.f:
            raise TrainingError(f"m={m} exceeds the sample dimensionality f={bundle.dims.f}")
        return replace(self, m=m)


@dataclass
class LogRow:
    iteration: int
    objective: float
    after_codes: float
    after_dicts: float
    max_col_norm: float
    max_condition: float
    lasso_unconverged: int
    reseeded: int
    t_codes: float = 0.0
    t_dicts: float = 0.0
    t_personal: float = 0.0

    PERSISTED = ("iteration", "objective", "after_codes", "after_dicts", "max_col_norm",
                 "max_condition", "lasso_unconverged", "reseeded")

    def persisted(self):
        return tuple(float(getattr(self, name)) for name in self.PERSISTED)


@dataclass
class TrainState:
    """Reduced-space training variables; lists are indexed by bridge (Xt, Yt, A, P) or group (D)."""

    Xt: list
    Yt: list
    D: list
    A: list
    P: list
    lam: float
    gamma: float
    bases: list = None
    # diagnostics from the most recent updates
    lasso_unconverged: int = 0
    conditions: list = None
    reseeded: int = 0

    @property
    def G(self):
        return len(self.D)


@dataclass
class AgingModel:
    dims: DatasetDims
    hyper: HyperParams
    bases: list
    dictionaries: list
    averages: list
    training_log: list = field(default_factory=list)
    initial_objective: float = float("nan")
    converged: bool = False

    @property
    def G(self):
        return self.dims.G

    @property
    def m(self):
        return self.dictionaries[0].shape[0]

    @property
    def k(self):
        return self.dictionaries[0].shape[1]

    def validate(self, ortho_tol=1e-8):
        """Re-check shapes and type invariants; raises ``TrainingError``."""
        G, f = self.dims.G, self.dims.f
        if not (len(self.bases) == len(self.dictionaries) == len(self.averages) == G):
            raise TrainingError("model must carry G bases, dictionaries and average faces")
        m, k = self.dictionaries[0].shape
        for g in range(G):
            basis, D, r = self.bases[g], self.dictionaries[g], self.averages[g]
            if basis.H.shape != (f, m) or D.shape != (m, k) or r.shape != (f,):
                raise TrainingError(f"group {g + 1}: inconsistent shapes")
            if not (np.all(np.isfinite(basis.H)) and np.all(np.isfinite(D)) and np.all(np.isfinite(r))):
                raise TrainingError(f"group {g + 1}: non-finite values")
            if basis.orthonormality_error() > ortho_tol:
                raise TrainingError(f"group {g + 1}: projection basis is not orthonormal")
            if np.linalg.norm(D, axis=0).max() > 1 + NORM_SLACK:
                raise TrainingError(f"group {g + 1}: constraint violation (dictionary column norm > 1)")
        return self


# -- objective ----------------------------------------------------------------

def objective_terms(state):
    """Per-bridge ``(fit_young, fit_old, personal, sparsity)`` contributions."""
    terms = []
    for g in range(state.G - 1):
        A, P = state.A[g], state.P[g]
        Ry = state.Xt[g] - state.D[g] @ A - P
        Ro = state.Yt[g] - state.D[g + 1] @ A - P
        terms.append((float(np.sum(Ry * Ry)), float(np.sum(Ro * Ro)),
                      state.gamma * float(np.sum(P * P)), state.lam * float(np.abs(A).sum())))
    return terms


def objective(state):
    for g in range(state.G - 1):
        n = state.Xt[g].shape[1]
        if state.Yt[g].shape != state.Xt[g].shape or state.A[g].shape[1] != n or state.P[g].shape != state.Xt[g].shape:
            raise TrainingError(f"bridge {g + 1}: shape mismatch")
    return float(sum(sum(t) for t in objective_terms(state)))


# -- block updates ------------------------------------------------------------

def update_codes(state, tol=DEFAULT_TOL, max_iter=None, backend=None):
    """Replace every ``A^g`` by the stacked-Lasso solution, warm-started from the current codes."""
    new_A, unconverged = [], 0
    for g in range(state.G - 1):
        batch = solve_coupled_codes(
            state.D[g], state.D[g + 1], state.Xt[g] - state.P[g], state.Yt[g] - state.P[g],
            state.lam, bridge=g, tol=tol, max_iter=max_iter, init=state.A[g], backend=backend,
        )
        new_A.append(batch.A)
        unconverged += int(np.count_nonzero(~batch.converged))
    return replace(state, A=new_A, lasso_unconverged=unconverged)


def update_personalized(state):
    """Closed form ``P^g = (Z^g + R^g) / (2 + gamma)``."""
    new_P = []
    for g in range(state.G - 1):
        Z = state.Xt[g] - state.D[g] @ state.A[g]
        R = state.Yt[g] - state.D[g + 1] @ state.A[g]
        new_P.append((Z + R) / (2.0 + state.gamma))
    return replace(state, P=new_P)


def indicators(c, G):
    """``(eps1, eps2)``: whether group ``c`` is the older side of bridge c-1 / younger side of bridge c."""
    return (0.0 if c == 0 else 1.0), (0.0 if c == G - 1 else 1.0)


def dictionary_system(state, c):
    """Normal equations ``D M = S`` for group ``c``, from the bridges it takes part in."""
    e1, e2 = indicators(c, state.G)
    k = state.D[c].shape[1]
    m = state.D[c].shape[0]
    M = np.zeros((k, k))
    S = np.zeros((m, k))
    if e1:
        A = state.A[c - 1]
        M += A @ A.T
        S += (state.Yt[c - 1] - state.P[c - 1]) @ A.T
    if e2:
        A = state.A[c]
        M += A @ A.T
        S += (state.Xt[c] - state.P[c]) @ A.T
    return M, S


def solve_dictionary(M, S):
    """Unconstrained minimiser of ``||V - D A||^2`` style blocks; returns ``(D, condition)``.

    A ridge of ``1e-8 trace(M)/k`` keeps the system solvable when some atoms
    are unused. Returns ``None`` for ``D`` when ``M`` is zero.
    """
    k = M.shape[0]
    tr = float(np.trace(M))
    if tr <= 0.0:
        return None, float("inf")
    Mr = M + (RIDGE * tr / k) * np.eye(k)
    D = np.linalg.solve(Mr, S.T).T
    return D, float(np.linalg.cond(Mr))


def dictionary_gradient(D, M, S):
    """Gradient of the group's fit terms with respect to its dictionary."""
    return 2.0 * (D @ M - S)


def project_columns(D):
    """Clip every column with norm above 1 back onto the unit sphere."""
    norms = np.linalg.norm(D, axis=0)
    return D / np.maximum(norms, 1.0)


def _block_value(D, M, S):
    # fit terms up to the D-independent constant
    return float(np.sum((D @ M) * D) - 2.0 * np.sum(S * D))


def _projected_gradient(D, M, S, iters=200):
    L = 2.0 * float(np.linalg.eigvalsh(M)[-1])
    if L <= 0:
        return D
    for _ in range(iters):
        D = project_columns(D - dictionary_gradient(D, M, S) / L)
    return D


def _reseed(state, c, D, dead):
    """Replace dead atoms with the worst-reconstructed samples of group ``c``."""
    cands, resid = [], []
    if c > 0:
        V = state.Yt[c - 1] - state.P[c - 1]
        cands.append(state.Yt[c - 1])
        resid.append(np.linalg.norm(V - D @ state.A[c - 1], axis=0))
    if c < state.G - 1:
        U = state.Xt[c] - state.P[c]
        cands.append(state.Xt[c])
        resid.append(np.linalg.norm(U - D @ state.A[c], axis=0))
    samples = np.hstack(cands)
    order = np.argsort(-np.concatenate(resid), kind="stable")
    norms = np.linalg.norm(samples, axis=0)
    order = [i for i in order if norms[i] > 0]
    for j, i in zip(dead, order):
        D[:, j] = samples[:, i] / norms[i]
    return min(len(dead), len(order))


def update_dictionaries(state, reseed=True):
    """Closed-form dictionary solve per group, then projection onto the unit ball.

    If clipping makes a group's fit worse than its previous dictionary, the
    block is instead improved by projected gradient from the previous one, so
    this update never increases the objective. Atoms unused by every code of
    the group's bridges are reseeded.
    """
    new_D, conds, reseeded = [], [], 0
    for c in range(state.G):
        M, S = dictionary_system(state, c)
        D_old = state.D[c]
        D, cond = solve_dictionary(M, S)
        conds.append(cond)
        if D is None:
            new_D.append(D_old.copy())
            continue
        D = project_columns(D)
        if _block_value(D, M, S) > _block_value(D_old, M, S):
            D = _projected_gradient(D_old.copy(), M, S)
        if reseed:
            rows = [state.A[b] for b in (c - 1, c) if 0 <= b < state.G - 1]
            used = np.any(np.hstack(rows) != 0, axis=1)
            dead = np.flatnonzero(~used)
            if dead.size:
                reseeded += _reseed(state, c, D, dead)
        new_D.append(D)
    return replace(state, D=new_D, conditions=conds, reseeded=reseeded)


# -- initialisation and training ----------------------------------------------

def fit_bases(bundle, hyper):
    return [fit_projection(bundle.group_samples(g), hyper.m, group=g, center=hyper.center, pad=True)
            for g in range(bundle.dims.G)]


def init_state(bundle, hyper, rng_seed=None, bases=None):
    """Dictionaries from shuffled projected samples (unit norm), zero codes and layers."""
    if hyper.m is None:
        hyper = hyper.resolve(bundle)
    if bases is None:
        bases = fit_bases(bundle, hyper)
    rng = np.random.default_rng(hyper.rng_seed if rng_seed is None else rng_seed)
    G, k, m = bundle.dims.G, hyper.k, hyper.m
    Xt = [project(bases[g], p.X) for g, p in enumerate(bundle.pairs)]
    Yt = [project(bases[g + 1], p.Y) for g, p in enumerate(bundle.pairs)]
    D = []
    for g in range(G):
        proj = project(bases[g], bundle.group_samples(g))
        pick = rng.permutation(proj.shape[1])[:k]
        cols = proj[:, pick]
        norms = np.linalg.norm(cols, axis=0)
        Dg = rng.standard_normal((m, k))
        ok = norms > 0
        Dg[:, : cols.shape[1]][:, ok] = cols[:, ok]
        Dg /= np.linalg.norm(Dg, axis=0)
        D.append(Dg)
    A = [np.zeros((k, p.n)) for p in bundle.pairs]
    P = [np.zeros((m, p.n)) for p in bundle.pairs]
    return TrainState(Xt, Yt, D, A, P, hyper.lam, hyper.gamma, bases)


def train_with_state(bundle, hyper=None, backend=None, callback=None):
    """Run the alternating minimisation; returns ``(model, final_state)``.

    Stops when the relative objective change drops below ``rel_tol`` or after
    ``max_outer_iter`` iterations (``model.converged`` is False then).
    """
    hyper = (hyper or HyperParams()).resolve(bundle)
    state = init_state(bundle, hyper)
    prev = initial = objective(state)
    rows, converged = [], False
    for it in range(1, hyper.max_outer_iter + 1):
        t0 = time.perf_counter()
        state = update_codes(state, backend=backend)
        after_codes = objective(state)
        t1 = time.perf_counter()
        state = update_dictionaries(state)
        after_dicts = objective(state)
        t2 = time.perf_counter()
        conds, reseeded = state.conditions, state.reseeded
        unconverged = state.lasso_unconverged
        state = update_personalized(state)
        obj = objective(state)
        t3 = time.perf_counter()
        row = LogRow(it, obj, after_codes, after_dicts,
                     max(float(np.linalg.norm(D, axis=0).max()) for D in state.D),
                     max(conds), unconverged, reseeded, t1 - t0, t2 - t1, t3 - t2)
        rows.append(row)
        log.debug("iter %d objective %.6g", it, obj)
        if callback is not None:
            callback(row, state)
        if not np.isfinite(obj):
            raise TrainingError(f"objective became non-finite at iteration {it}")
        if abs(prev - obj) <= hyper.rel_tol * abs(prev):
            converged = True
            break
        prev = obj
    model = AgingModel(
        dims=bundle.dims, hyper=hyper, bases=state.bases,
        dictionaries=[D.copy() for D in state.D],
        averages=list(compute_average_faces(bundle).faces),
        training_log=rows, initial_objective=initial, converged=converged,
    )
    return model, state


def train(bundle, hyper=None, backend=None, callback=None):
    return train_with_state(bundle, hyper, backend=backend, callback=callback)[0]


def personalized_full(state, g):
    """Pixel-space view of ``P^g``, lifted with the younger group's basis (offset excluded)."""
    return state.bases[g].H @ state.P[g]


def format_log_csv(rows, hyper=None):
    """CSV training log; with ``hyper`` a leading ``#`` line records the hyperparameters."""
    head = "iteration,objective,max_col_norm,t_codes,t_dicts,t_personal,after_codes,after_dicts,max_condition,lasso_unconverged,reseeded"
    lines = [head]
    if hyper is not None:
        lines.insert(0, f"# lambda={hyper.lam!r} gamma={hyper.gamma!r} k={hyper.k} m={hyper.m} "
                        f"rel_tol={hyper.rel_tol!r} max_outer_iter={hyper.max_outer_iter} seed={hyper.rng_seed}")
    for r in rows:
        lines.append(f"{r.iteration},{r.objective!r},{r.max_col_norm!r},{r.t_codes:.6f},{r.t_dicts:.6f},"
                     f"{r.t_personal:.6f},{r.after_codes!r},{r.after_dicts!r},{r.max_condition!r},"
                     f"{r.lasso_unconverged},{r.reseeded}")
    return "\n".join(lines) + "\n"
