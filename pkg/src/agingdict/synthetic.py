"""Planted-model corpora with known dictionaries, codes and personalised layers.

Faces are built so they look like normalised images: every dictionary has a
constant "brightness" atom carried by the constant first column of each
group basis, every code puts about ``0.5 * sqrt(f)`` on it (mean pixel near
0.5), and a few sparse atoms add zero-mean structure with pixel standard
deviation near ``CONTRAST``.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from agingdict.dataset import (
    bundle_from_arrays, compute_average_faces, format_manifest, write_sample,
)
from agingdict.dictionary_learning import AgingModel, HyperParams
from agingdict.projection import ProjectionBasis, fix_signs

CONTRAST = 0.08
LAYER_SCALE = 0.02


@dataclass
class PlantedInstance:
    bundle: object
    model: AgingModel
    codes: list
    layers: list
    test_code: np.ndarray
    test_layer: np.ndarray
    test_faces: list  # noise-free faces of the test subject, one per group


def planted_bases(f, G, m, rng):
    if m > f:
        raise ValueError("m must not exceed f")
    out = []
    for g in range(G):
        Q, _ = np.linalg.qr(np.column_stack([np.ones(f), rng.standard_normal((f, m - 1))]))
        Q[:, 0] = 1.0 / np.sqrt(f)
        out.append(ProjectionBasis(g, fix_signs(Q), np.zeros(f)))
    return out


def planted_dictionaries(G, m, k, rng):
    out = []
    for _ in range(G):
        D = np.zeros((m, k))
        D[0, 0] = 1.0
        if k > 1:
            D[1:, 1:] = rng.standard_normal((m - 1, k - 1))
            D[:, 1:] /= np.linalg.norm(D[:, 1:], axis=0)
        out.append(D)
    return out


def planted_codes(f, k, n, sparsity, rng):
    A = np.zeros((k, n))
    A[0] = 0.5 * np.sqrt(f) * rng.uniform(0.9, 1.1, n)
    s = min(sparsity, k - 1)
    if s:
        amp = CONTRAST * np.sqrt(f / s)
        for i in range(n):
            idx = 1 + rng.choice(k - 1, size=s, replace=False)
            A[idx, i] = amp * rng.uniform(0.5, 1.5, s) * rng.choice((-1.0, 1.0), s)
    return A


def planted_layers(f, m, n, rng):
    P = np.zeros((m, n))
    if m > 1:
        P[1:] = rng.standard_normal((m - 1, n))
        P *= LAYER_SCALE * np.sqrt(f) / np.sqrt(m - 1)
    return P


def make_planted(f=1024, G=5, k=20, m=40, n=30, sparsity=3, noise=0.01, seed=0,
                 lam=0.01, gamma=0.1, layers=True):
    """Generate a corpus ``X^g = H^g (D^g a + p) + noise``, ``Y^g = H^{g+1} (D^{g+1} a + p) + noise``.

    Samples are clipped to [0,1] after the noise is added.
    """
    if G < 2 or min(f, k, m, n) < 1 or m > f:
        raise ValueError("inconsistent dimensions")
    rng = np.random.default_rng(seed)
    bases = planted_bases(f, G, m, rng)
    dicts = planted_dictionaries(G, m, k, rng)
    codes, lays, Xs, Ys = [], [], [], []
    for g in range(G - 1):
        A = planted_codes(f, k, n, sparsity, rng)
        P = planted_layers(f, m, n, rng) if layers else np.zeros((m, n))
        X = bases[g].H @ (dicts[g] @ A + P)
        Y = bases[g + 1].H @ (dicts[g + 1] @ A + P)
        if noise:
            X = X + noise * rng.standard_normal(X.shape)
            Y = Y + noise * rng.standard_normal(Y.shape)
        Xs.append(np.clip(X, 0.0, 1.0))
        Ys.append(np.clip(Y, 0.0, 1.0))
        codes.append(A)
        lays.append(P)
    bundle = bundle_from_arrays(Xs, Ys)
    a = planted_codes(f, k, 1, sparsity, rng)[:, 0]
    p = planted_layers(f, m, 1, rng)[:, 0] if layers else np.zeros(m)
    faces = [bases[g].H @ (dicts[g] @ a + p) for g in range(G)]
    model = AgingModel(
        dims=bundle.dims, hyper=HyperParams(lam=lam, gamma=gamma, k=k, m=m, rng_seed=seed),
        bases=bases, dictionaries=dicts, averages=list(compute_average_faces(bundle).faces),
    )
    return PlantedInstance(bundle, model, codes, lays, a, p, faces)


def face_name(g, ext="txt"):
    """File name for a face of 0-based group ``g``."""
    return f"group_{g + 1:02d}.{ext}"


def write_planted(inst, out_dir, ext="txt", start_group=0):
    """Write manifest, samples, ground-truth model and a held-out test subject.

    Layout: ``manifest.txt``, ``samples/``, ``truth.adlm``, ``test/input.<ext>``
    (the test face in ``start_group``) and ``test/truth/group_XX.<ext>`` for
    every later group.
    """
    from agingdict.model_store import save

    out = Path(out_dir)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    (out / "test" / "truth").mkdir(parents=True, exist_ok=True)
    bridges = []
    for g, pair in enumerate(inst.bundle.pairs):
        xs, ys = [], []
        for i in range(pair.n):
            for side, M, paths in (("x", pair.X, xs), ("y", pair.Y, ys)):
                rel = f"samples/b{g + 1:02d}_{side}{i:04d}.{ext}"
                write_sample(out / rel, M[:, i])
                paths.append(rel)
        bridges.append((xs, ys))
    dims = inst.bundle.dims
    (out / "manifest.txt").write_text(format_manifest(dims.f, dims.G, bridges))
    save(inst.model, out / "truth.adlm")
    write_sample(out / "test" / f"input.{ext}", np.clip(inst.test_faces[start_group], 0.0, 1.0))
    for g in range(start_group + 1, dims.G):
        write_sample(out / "test" / "truth" / face_name(g, ext), np.clip(inst.test_faces[g], 0.0, 1.0))
    return out / "manifest.txt"
