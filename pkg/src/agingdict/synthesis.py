"""Age progression by chained coupled sparse coding.

Starting from a face in group ``g`` the model renders groups ``g+1 .. G-1``
(0-based). Each step codes the pair (current face, estimate of the next
group's face) on the stacked dictionaries of the two groups, with one
personalised layer shared by both halves, and renders the next face from the
older half. Estimates start at the average faces; every further pass reuses
the previous pass's faces as estimates.
"""

from dataclasses import dataclass, field

import numpy as np

from agingdict.projection import project
from agingdict.sparse_coding import DEFAULT_TOL, solve_lasso

SIGNS = ("add", "subtract")
INNER_TOL = 1e-6
INNER_MAX = 100


class SynthesisError(ValueError):
    pass


@dataclass
class SynthesisRequest:
    input: np.ndarray
    start_group: int  # 0-based, must be < G - 1
    passes: int = 3
    sign_convention: str = "add"

    def __post_init__(self):
        if self.passes < 1:
            raise SynthesisError("passes must be >= 1")
        if self.sign_convention not in SIGNS:
            raise SynthesisError(f"sign_convention must be one of {SIGNS}")


@dataclass
class StepResult:
    face: np.ndarray      # clamped to [0,1]
    raw: np.ndarray       # unclamped, used as the next step's input
    code: np.ndarray
    layer: np.ndarray     # reduced space
    layer_full: np.ndarray
    trace: list


@dataclass
class AgingSequence:
    start_group: int
    faces: list
    codes: list
    personalized: list
    personalized_full: list
    diagnostics: list = field(default_factory=list)  # [pass][step] -> objective trace
    pass_faces: list = field(default_factory=list)   # [pass][step] -> raw face


def step_objective(Wy, Wo, u, v, a, p, lam, gamma):
    ry = u - Wy @ a - p
    ro = v - Wo @ a - p
    return float(ry @ ry + ro @ ro + lam * np.abs(a).sum() + gamma * (p @ p))


def _check(model, g, *vectors):
    if not 0 <= g < model.G - 1:
        raise SynthesisError(f"group {g} out of range 0..{model.G - 2}")
    for v in vectors:
        if np.shape(v) != (model.dims.f,):
            raise SynthesisError(f"dimension mismatch: expected vectors of length {model.dims.f}")


def synthesize_step(model, x_current, estimate, g, sign_convention="add", lam=None, gamma=None,
                    backend=None):
    """Render group ``g+1`` from a face in group ``g`` and an estimate of the result.

    Code and layer are found by alternating a stacked Lasso for the code with
    the closed-form layer update until the objective changes by less than
    1e-6 (relative) or after 100 alternations.
    """
    _check(model, g, x_current, estimate)
    if sign_convention not in SIGNS:
        raise SynthesisError(f"sign_convention must be one of {SIGNS}")
    lam = model.hyper.lam if lam is None else lam
    gamma = model.hyper.gamma if gamma is None else gamma
    Wy, Wo = model.dictionaries[g], model.dictionaries[g + 1]
    u = project(model.bases[g], x_current)
    v = project(model.bases[g + 1], estimate)
    W = np.vstack([Wy, Wo])
    a = np.zeros(Wy.shape[1])
    p = np.zeros(Wy.shape[0])
    prev = step_objective(Wy, Wo, u, v, a, p, lam, gamma)
    trace = [prev]
    for _ in range(INNER_MAX):
        a = solve_lasso(W, np.concatenate([u - p, v - p]), lam, tol=DEFAULT_TOL, init=a,
                        backend=backend).coef
        p = (u - Wy @ a + v - Wo @ a) / (2.0 + gamma)
        cur = step_objective(Wy, Wo, u, v, a, p, lam, gamma)
        trace.append(cur)
        if abs(prev - cur) <= INNER_TOL * abs(prev):
            break
        prev = cur
    H = model.bases[g + 1].H
    layer_full = H @ p
    older = Wo @ a + p if sign_convention == "add" else Wo @ a - p
    raw = H @ older + model.bases[g + 1].offset
    return StepResult(np.clip(raw, 0.0, 1.0), raw, a, p, layer_full, trace)


def synthesize_sequence(model, request, backend=None):
    """Run ``request.passes`` chained sweeps; returns the last sweep's faces."""
    g0 = request.start_group
    x = np.asarray(request.input, dtype=np.float64)
    _check(model, g0, x)
    if not np.all(np.isfinite(x)):
        raise SynthesisError("non-finite input")
    estimates = {c: np.asarray(model.averages[c], dtype=np.float64) for c in range(g0 + 1, model.G)}
    diagnostics, pass_faces = [], []
    for _ in range(request.passes):
        current = x
        fresh, steps = {}, []
        for c in range(g0, model.G - 1):
            res = synthesize_step(model, current, estimates[c + 1], c, request.sign_convention,
                                  backend=backend)
            fresh[c + 1] = res.raw
            current = res.raw
            steps.append(res)
        diagnostics.append([s.trace for s in steps])
        pass_faces.append([s.raw for s in steps])
        estimates = fresh
    return AgingSequence(
        start_group=g0,
        faces=[s.face for s in steps],
        codes=[s.code for s in steps],
        personalized=[s.layer for s in steps],
        personalized_full=[s.layer_full for s in steps],
        diagnostics=diagnostics,
        pass_faces=pass_faces,
    )


def pass_changes(seq):
    """Relative change of the stacked faces between consecutive passes."""
    stacked = [np.concatenate(faces) for faces in seq.pass_faces]
    out = []
    for a, b in zip(stacked, stacked[1:]):
        diff, ref = np.linalg.norm(b - a), np.linalg.norm(a)
        out.append(float(diff / ref) if ref > 0 else (0.0 if diff == 0 else float("inf")))
    return out
