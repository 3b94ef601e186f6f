import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from agingdict import _cd_py, kernels
from agingdict.sparse_coding import (
    ShapeError, _polish, kkt_residual, lasso_objective, soft_threshold, solve_coupled_codes, solve_lasso,
)
from conftest import unit_columns
from oracles import lasso_enumerate, lasso_grid_refine, lasso_value


def test_orthonormal_least_squares(rng, backend):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    t = rng.standard_normal(6)
    res = solve_lasso(Q, t, 0.0, backend=backend)
    assert res.converged
    np.testing.assert_allclose(res.coef, Q.T @ t, atol=1e-9)


@pytest.mark.parametrize("lam", [1e-3, 0.1, 5.0])
def test_zero_target_gives_zero(rng, lam, backend):
    res = solve_lasso(rng.standard_normal((5, 4)), np.zeros(5), lam, backend=backend)
    assert np.all(res.coef == 0)
    assert res.sweeps == 0


def test_small_instance_matches_grid_and_enumeration(backend):
    rng = np.random.default_rng(3)
    design, target = rng.standard_normal((2, 3)), rng.standard_normal(2)
    lam = 0.01
    res = solve_lasso(design, target, lam, max_iter=100000, backend=backend)
    value = lasso_value(design, target, res.coef, lam)
    grid_best, _ = lasso_grid_refine(design, target, lam, res.coef)
    _, exact = lasso_enumerate(design, target, lam)
    assert value - grid_best <= 1e-6
    assert abs(value - exact) <= 1e-6
    assert kkt_residual(design, target, res.coef, lam) <= 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_matches_exact_enumeration(seed):
    rng = np.random.default_rng(seed)
    d, k = rng.integers(2, 8), rng.integers(1, 6)
    design, target = rng.standard_normal((d, k)), rng.standard_normal(d)
    lam = float(rng.choice([0.0, 0.01, 0.1, 1.0]))
    res = solve_lasso(design, target, lam, max_iter=100000)
    _, exact = lasso_enumerate(design, target, lam)
    assert lasso_objective(design, target, res.coef, lam) == pytest.approx(exact, abs=1e-7)


def test_unregularised_full_rank_equals_normal_equations(rng):
    design, target = rng.standard_normal((12, 5)), rng.standard_normal(12)
    res = solve_lasso(design, target, 0.0, tol=1e-12, max_iter=100000)
    normal = np.linalg.solve(design.T @ design, design.T @ target)
    np.testing.assert_allclose(res.coef, normal, atol=1e-8)


def test_sparsity_non_increasing_in_lambda(rng):
    design, target = rng.standard_normal((10, 12)), rng.standard_normal(10)
    counts = []
    for lam in [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0]:
        res = solve_lasso(design, target, lam, tol=1e-10, max_iter=200000)
        counts.append(int(np.count_nonzero(np.abs(res.coef) > 1e-9)))
    assert counts == sorted(counts, reverse=True)
    assert counts[-1] == 0


def test_monotone_descent_every_coordinate(rng):
    design, target = rng.standard_normal((8, 6)), rng.standard_normal(8)
    lam = 0.3
    Q, b = design.T @ design, design.T @ target
    values = [lasso_value(design, target, np.zeros(6), lam)]
    a = np.zeros(6)
    _cd_py.lasso_gram(Q, b, lam, a, 1e-12, 50,
                      callback=lambda j, x: values.append(lasso_value(design, target, x, lam)))
    assert len(values) > 6
    assert np.all(np.diff(values) <= 1e-12)


@given(rho=st.floats(-10, 10), q=st.floats(0.01, 10), lam=st.floats(0, 5))
def test_one_dimensional_step_is_soft_threshold(rho, q, lam):
    # one coordinate: minimise q a^2 - 2 rho a + lam |a|
    a = np.zeros(1)
    _cd_py.lasso_gram(np.array([[q]]), np.array([rho]), lam, a, 0.0, 1)
    assert a[0] == pytest.approx(soft_threshold(rho, lam / 2) / q, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    design=arrays(np.float64, (6, 4), elements=st.floats(-3, 3)),
    target=arrays(np.float64, 6, elements=st.floats(-3, 3)),
    lam=st.sampled_from([0.0, 0.01, 0.1, 1.0]),
)
def test_kkt_holds_on_convergence(design, target, lam):
    res = solve_lasso(design, target, lam, max_iter=200000)
    if res.converged:
        assert kkt_residual(design, target, res.coef, lam) <= 1e-6


def test_backends_agree(rng):
    if len(kernels.BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    design = rng.standard_normal((30, 15))
    T = rng.standard_normal((30, 40))
    Q, B = design.T @ design, design.T @ T
    out = {}
    for name in kernels.BACKENDS:
        A = np.zeros((15, 40))
        sweeps, conv = kernels.lasso_gram_batch(Q, B, 0.05, A, 1e-9, 5000, backend=name)
        out[name] = (A, sweeps, conv)
    (A1, s1, c1), (A2, s2, c2) = out.values()
    np.testing.assert_allclose(A1, A2, rtol=0, atol=1e-12)
    assert np.array_equal(s1, s2) and np.array_equal(c1, c2)


def test_max_iter_exhaustion_returns_flag(rng):
    design, target = rng.standard_normal((10, 8)), rng.standard_normal(10)
    res = solve_lasso(design, target, 0.01, tol=0.0, max_iter=3)
    assert not res.converged and res.sweeps == 3
    assert np.all(np.isfinite(res.coef))


def test_rejects_bad_input(rng):
    with pytest.raises(ValueError, match="non-finite"):
        solve_lasso(np.array([[np.nan, 1.0]]), np.array([1.0]), 0.1)
    with pytest.raises(ValueError):
        solve_lasso(rng.standard_normal((3, 2)), np.zeros(3), -1.0)
    with pytest.raises(ShapeError):
        solve_lasso(rng.standard_normal((3, 2)), np.zeros(4), 0.1)


# -- coupled codes ------------------------------------------------------------

def test_coupled_zero_targets(rng, backend):
    Wy, Wo = unit_columns(rng, 8, 5), unit_columns(rng, 8, 5)
    batch = solve_coupled_codes(Wy, Wo, np.zeros((8, 4)), np.zeros((8, 4)), 0.1, backend=backend)
    assert np.all(batch.A == 0)


def test_coupled_plant_and_recover(rng, backend):
    Wy, Wo = unit_columns(rng, 20, 6), unit_columns(rng, 20, 6)
    assert np.linalg.cond(np.vstack([Wy, Wo])) < 10  # well-conditioned stack
    A_star = rng.standard_normal((6, 5)) * (rng.random((6, 5)) < 0.5)
    batch = solve_coupled_codes(Wy, Wo, Wy @ A_star, Wo @ A_star, 1e-6, tol=1e-10, max_iter=10000,
                                backend=backend)
    np.testing.assert_allclose(batch.A, A_star, atol=1e-3)


def test_coupled_single_pair_equals_stacked_lasso(rng):
    Wy, Wo = unit_columns(rng, 7, 4), unit_columns(rng, 7, 4)
    u, v = rng.standard_normal(7), rng.standard_normal(7)
    batch = solve_coupled_codes(Wy, Wo, u[:, None], v[:, None], 0.05)
    direct = solve_lasso(np.vstack([Wy, Wo]), np.concatenate([u, v]), 0.05)
    np.testing.assert_allclose(batch.A[:, 0], direct.coef, atol=1e-9)


def test_coupled_shape_mismatch(rng):
    with pytest.raises(ShapeError):
        solve_coupled_codes(unit_columns(rng, 5, 3), unit_columns(rng, 5, 4), np.zeros((5, 1)),
                            np.zeros((5, 1)), 0.1)


def test_underdetermined_hard_instance_converges(backend):
    # plain coordinate descent needs ~160k sweeps here; the support polish finishes it
    rng = np.random.default_rng(2024)
    for _ in range(80):
        d, k = int(rng.integers(1, 11)), int(rng.integers(1, 13))
        lam = float(rng.choice([0.0, 0.01, 0.1]))
        design, target = rng.standard_normal((d, k)), rng.standard_normal(d)
    assert (d, k, lam) == (9, 12, 0.01)
    res = solve_lasso(design, target, lam, max_iter=100000, backend=backend)
    assert res.converged and res.sweeps < 100000
    assert kkt_residual(design, target, res.coef, lam) <= 1e-7
    assert np.count_nonzero(res.coef) <= d


@settings(max_examples=80, deadline=None)
@given(
    design=arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 8)), elements=st.floats(-3, 3)),
    seed=st.integers(0, 2 ** 16),
    lam=st.sampled_from([0.0, 0.01, 0.1, 1.0]),
)
def test_polish_never_increases_objective(design, seed, lam):
    rng = np.random.default_rng(seed)
    target = rng.standard_normal(design.shape[0])
    Q, b = design.T @ design, design.T @ target
    a = np.zeros(design.shape[1])
    _cd_py.lasso_gram(Q, b, lam, a, 0.0, 3)
    cand = _polish(Q, b, lam, a, 1e-7)
    if cand is not None:
        assert lasso_value(design, target, cand, lam) <= lasso_value(design, target, a, lam) + 1e-9
        assert kkt_residual(design, target, cand, lam) <= 1e-7 + 1e-12
