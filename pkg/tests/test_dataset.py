import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from agingdict.dataset import (
    DatasetError, bundle_from_arrays, compute_average_faces, format_manifest, load_dataset, normalize,
    read_pgm, write_pgm, write_text_sample,
)


def write_corpus(tmp_path, Xs, Ys, ext="txt", labels=()):
    bridges = []
    for g, (X, Y) in enumerate(zip(Xs, Ys)):
        xs, ys = [], []
        for i in range(X.shape[1]):
            for M, paths, side in ((X, xs, "x"), (Y, ys, "y")):
                rel = f"s/b{g}{side}{i}.{ext}"
                (tmp_path / "s").mkdir(exist_ok=True)
                if ext == "pgm":
                    write_pgm(tmp_path / rel, M[:, i] / 255.0, 2, M.shape[0] // 2)
                else:
                    write_text_sample(tmp_path / rel, M[:, i])
                paths.append(rel)
        bridges.append((xs, ys))
    path = tmp_path / "manifest.txt"
    path.write_text(format_manifest(Xs[0].shape[0], len(Xs) + 1, bridges, labels))
    return path, bridges


def test_manifest_dims(tmp_path, rng):
    Xs = [rng.random((4, 2)) for _ in range(2)]
    Ys = [rng.random((4, 2)) for _ in range(2)]
    path, _ = write_corpus(tmp_path, Xs, Ys, labels=("0-5", "6-10", "11-15"))
    bundle = load_dataset(path)
    assert (bundle.dims.f, bundle.dims.G, bundle.dims.n_per_bridge) == (4, 3, (2, 2))
    assert bundle.dims.group_labels == ("0-5", "6-10", "11-15")


def test_pair_alignment(tmp_path, rng):
    Xs = [rng.random((6, 3)) for _ in range(3)]
    Ys = [rng.random((6, 3)) for _ in range(3)]
    path, bridges = write_corpus(tmp_path, Xs, Ys)
    bundle = load_dataset(path)
    for g, pair in enumerate(bundle.pairs):
        assert pair.x_paths == tuple(bridges[g][0]) and pair.y_paths == tuple(bridges[g][1])
        np.testing.assert_array_equal(pair.X, Xs[g])
        np.testing.assert_array_equal(pair.Y, Ys[g])


def test_pair_count_mismatch(tmp_path, rng):
    path, _ = write_corpus(tmp_path, [rng.random((4, 2))], [rng.random((4, 2))])
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")  # drop the last Y path
    with pytest.raises(DatasetError, match="pair count mismatch"):
        load_dataset(path)


def test_graymap_endpoints(tmp_path):
    raw = np.array([0, 255, 128, 255, 0, 64], dtype=float)
    path, _ = write_corpus(tmp_path, [raw[:, None]], [raw[::-1, None]], ext="pgm")
    bundle = load_dataset(path)
    X = bundle.pairs[0].X[:, 0]
    assert X[0] == 0.0 and X[1] == 1.0
    np.testing.assert_allclose(X, raw / 255.0)


def test_pgm_roundtrip_and_header_comments(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 10, 20, 30, 40, 255]))
    pixels, w, h, maxval = read_pgm(p)
    assert (w, h, maxval) == (3, 2, 255)
    assert pixels.tolist() == [0, 10, 20, 30, 40, 255]


def test_sixteen_bit_graymap(tmp_path):
    p = tmp_path / "b.pgm"
    p.write_bytes(b"P5 2 1 65535\n" + (65535).to_bytes(2, "big") + (0).to_bytes(2, "big"))
    pixels, *_ = read_pgm(p)
    assert pixels.tolist() == [65535.0, 0.0]


def test_missing_file(tmp_path, rng):
    path, bridges = write_corpus(tmp_path, [rng.random((4, 1))], [rng.random((4, 1))])
    (tmp_path / bridges[0][1][0]).unlink()
    with pytest.raises(DatasetError, match="missing file"):
        load_dataset(path)
    with pytest.raises(DatasetError, match="missing file"):
        load_dataset(tmp_path / "nope.txt")


def test_shape_mismatch(tmp_path, rng):
    path, bridges = write_corpus(tmp_path, [rng.random((4, 2))], [rng.random((4, 2))])
    write_text_sample(tmp_path / bridges[0][0][1], rng.random(5))
    with pytest.raises(DatasetError, match="shape mismatch"):
        load_dataset(path)


def test_zero_pair_bridge(tmp_path):
    (tmp_path / "m.txt").write_text("4 2\nbridge 1\nX\nY\n")
    with pytest.raises(DatasetError, match="zero pairs"):
        load_dataset(tmp_path / "m.txt")


def test_non_finite_rejected(tmp_path, rng):
    path, bridges = write_corpus(tmp_path, [rng.random((3, 1))], [rng.random((3, 1))])
    (tmp_path / bridges[0][0][0]).write_text("0.1\nnan\n0.3\n")
    with pytest.raises(DatasetError, match="non-finite"):
        load_dataset(path)


def test_normalize_8bit_scaling(rng):
    X = rng.integers(0, 256, (5, 3)).astype(float)
    X[0, 0] = 255
    bundle = bundle_from_arrays([X], [X[:, ::-1]])
    out = normalize(bundle)
    np.testing.assert_array_equal(out.pairs[0].X, X / 255.0)


def test_normalize_scalar_oracle(rng):
    Xs = [rng.integers(0, 256, (4, 3)).astype(float) for _ in range(2)]
    Ys = [rng.integers(0, 256, (4, 3)).astype(float) for _ in range(2)]
    Xs[1][2, 1] = 255.0
    out = normalize(bundle_from_arrays(Xs, Ys))
    for g in range(2):
        for M_in, M_out in ((Xs[g], out.pairs[g].X), (Ys[g], out.pairs[g].Y)):
            for i in range(M_in.shape[0]):
                for j in range(M_in.shape[1]):
                    assert M_out[i, j] == M_in[i, j] / 255.0


def test_normalize_zero_dataset_allowed():
    z = np.zeros((3, 2))
    out = normalize(bundle_from_arrays([z], [z]))
    assert np.all(out.pairs[0].X == 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(0, 65535)))
def test_normalize_idempotent(X):
    once = normalize(bundle_from_arrays([X], [X]))
    twice = normalize(once)
    assert np.array_equal(once.pairs[0].X, twice.pairs[0].X)
    assert once.pairs[0].X.max(initial=0) <= 1.0


def test_average_two_point_mean():
    X = np.array([[0.0], [0.0], [0.0], [0.0]])
    Y = np.array([[1.0], [1.0], [1.0], [1.0]])
    # group 2 of a 3-group bundle sees Y of bridge 1 and X of bridge 2
    bundle = bundle_from_arrays([X, Y], [np.zeros((4, 1)), np.full((4, 1), 0.25)])
    faces = compute_average_faces(bundle)
    np.testing.assert_array_equal(faces[1], [0.5, 0.5, 0.5, 0.5])


def test_average_single_column(rng):
    v = rng.random((6, 1))
    bundle = bundle_from_arrays([v], [rng.random((6, 1))])
    np.testing.assert_array_equal(compute_average_faces(bundle)[0], v[:, 0])


def test_average_matches_accumulation_pass(rng):
    Xs = [rng.random((7, 10)) for _ in range(3)]
    Ys = [rng.random((7, 10)) for _ in range(3)]
    bundle = bundle_from_arrays(Xs, Ys)
    faces = compute_average_faces(bundle)
    for g in range(4):
        cols = []
        if g < 3:
            cols += [Xs[g][:, i] for i in range(10)]
        if g > 0:
            cols += [Ys[g - 1][:, i] for i in range(10)]
        acc = np.zeros(7)
        for c in cols:
            acc = acc + c
        np.testing.assert_allclose(faces[g], acc / len(cols), atol=1e-15)
        lo = np.min(cols, axis=0)
        hi = np.max(cols, axis=0)
        assert np.all(faces[g] >= lo - 1e-15) and np.all(faces[g] <= hi + 1e-15)
