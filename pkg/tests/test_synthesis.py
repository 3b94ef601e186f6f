import numpy as np
import pytest
from dataclasses import replace

from agingdict.synthesis import (
    SynthesisError, SynthesisRequest, pass_changes, synthesize_sequence, synthesize_step,
)
from agingdict.synthetic import make_planted


@pytest.fixture(scope="module")
def planted():
    return make_planted(f=256, G=4, k=8, m=16, n=20, sparsity=2, noise=0.0, seed=11)


def chain_faces(inst):
    m = inst.model
    return [m.bases[g].H @ (m.dictionaries[g] @ inst.test_code) for g in range(m.G)]


def test_planted_step_fixed_point(planted, backend):
    faces = chain_faces(planted)
    res = synthesize_step(planted.model, faces[1], faces[2], 1, lam=1e-6, backend=backend)
    assert np.abs(res.raw - faces[2]).max() <= 1e-3
    assert np.linalg.norm(res.layer) <= 1e-3


def test_zero_step(planted):
    z = np.zeros(planted.model.dims.f)
    res = synthesize_step(planted.model, z, z, 0)
    assert np.all(res.code == 0) and np.all(res.layer == 0) and np.all(res.face == 0)


def test_inner_trace_non_increasing(planted, rng):
    x = rng.random(planted.model.dims.f)
    res = synthesize_step(planted.model, x, planted.model.averages[1], 0)
    assert len(res.trace) >= 2
    assert np.all(np.diff(res.trace) <= 1e-9 * res.trace[0])


def test_sequence_shape_and_range(planted, rng):
    x = rng.random(planted.model.dims.f)
    seq = synthesize_sequence(planted.model, SynthesisRequest(x, 1))
    assert len(seq.faces) == planted.model.G - 1 - 1
    assert len(seq.diagnostics) == 3 and len(seq.pass_faces) == 3
    for face in seq.faces:
        assert np.all(np.isfinite(face)) and face.min() >= 0 and face.max() <= 1


def test_passes_honoured(planted, rng):
    x = rng.random(planted.model.dims.f)
    for passes in (1, 2, 5):
        seq = synthesize_sequence(planted.model, SynthesisRequest(x, 0, passes=passes))
        assert len(seq.diagnostics) == passes


def test_two_groups_single_step(rng):
    inst = make_planted(f=64, G=2, k=5, m=10, n=12, sparsity=2, noise=0.0, seed=2)
    x = rng.random(64)
    seq = synthesize_sequence(inst.model, SynthesisRequest(x, 0, passes=1))
    step = synthesize_step(inst.model, x, inst.model.averages[1], 0)
    assert len(seq.faces) == 1
    np.testing.assert_array_equal(seq.faces[0], step.face)


def test_sparsity_compared_with_unpenalised(planted, rng):
    # sparse planted pair plus a little noise: the penalty should drop the noise-only atoms
    f = planted.model.dims.f
    faces = chain_faces(planted)
    x = faces[0] + 1e-4 * rng.standard_normal(f)
    est = faces[1] + 1e-4 * rng.standard_normal(f)
    sparse = synthesize_step(planted.model, x, est, 0, lam=0.01)
    dense = synthesize_step(planted.model, x, est, 0, lam=0.0)
    assert np.count_nonzero(sparse.code) <= planted.model.k
    assert np.count_nonzero(sparse.code) < np.count_nonzero(dense.code)


def test_deterministic(planted, rng):
    x = rng.random(planted.model.dims.f)
    a = synthesize_sequence(planted.model, SynthesisRequest(x, 0))
    b = synthesize_sequence(planted.model, SynthesisRequest(x, 0))
    assert b"".join(f.tobytes() for f in a.faces) == b"".join(f.tobytes() for f in b.faces)


def test_sign_conventions_differ_by_layer(planted, rng):
    x = rng.random(planted.model.dims.f)
    est = planted.model.averages[1]
    add = synthesize_step(planted.model, x, est, 0, "add")
    sub = synthesize_step(planted.model, x, est, 0, "subtract")
    np.testing.assert_array_equal(add.code, sub.code)
    np.testing.assert_allclose(add.raw - sub.raw, 2 * add.layer_full, atol=1e-12)


def test_pass_stability_on_planted_chain(planted):
    faces = chain_faces(planted)
    seq = synthesize_sequence(planted.model, SynthesisRequest(faces[0], 0))
    d12, d23 = pass_changes(seq)
    assert d23 < d12


def test_pass_changes_zero_faces(planted):
    z = np.zeros(planted.model.dims.f)
    model = replace(planted.model, averages=[z] * planted.model.G)
    seq = synthesize_sequence(model, SynthesisRequest(z, 0))
    assert pass_changes(seq) == [0.0, 0.0]


def test_errors(planted):
    f = planted.model.dims.f
    with pytest.raises(SynthesisError, match="out of range"):
        synthesize_sequence(planted.model, SynthesisRequest(np.zeros(f), planted.model.G - 1))
    with pytest.raises(SynthesisError, match="dimension mismatch"):
        synthesize_sequence(planted.model, SynthesisRequest(np.zeros(f + 1), 0))
    with pytest.raises(SynthesisError):
        SynthesisRequest(np.zeros(f), 0, passes=0)
    with pytest.raises(SynthesisError):
        SynthesisRequest(np.zeros(f), 0, sign_convention="mul")
    bad = np.zeros(f)
    bad[0] = np.nan
    with pytest.raises(SynthesisError, match="non-finite"):
        synthesize_sequence(planted.model, SynthesisRequest(bad, 0))
