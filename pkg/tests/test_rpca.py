import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artishape.poisson_features import CANONICAL_SPACES, build_feature_matrix
from artishape.rpca import distinctness, objective, rpca_ialm, shrink, svt
from artishape.synthetic import cross_with_labels


def test_shrink_examples():
    np.testing.assert_array_equal(shrink([3.0, -0.5], 1.0), [2.0, 0.0])
    np.testing.assert_array_equal(shrink([-2.0], 5.0), [0.0])
    M = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(shrink(M, 0.0), M)


def test_svt_rank_one():
    rng = np.random.default_rng(1)
    u = rng.normal(size=7)
    u /= np.linalg.norm(u)
    v = rng.normal(size=5)
    v /= np.linalg.norm(v)
    M = 5.0 * np.outer(u, v)
    np.testing.assert_allclose(svt(M, 2.0), 3.0 * np.outer(u, v), atol=1e-12)
    np.testing.assert_array_equal(svt(M, 5.5), np.zeros_like(M))


def test_svt_zero_threshold_is_identity():
    M = np.random.default_rng(2).normal(size=(40, 30))
    np.testing.assert_allclose(svt(M, 0.0), M, atol=1e-10)


def test_zero_matrix():
    res = rpca_ialm(np.zeros((10, 30)))
    assert res.converged and res.final_residual == 0.0
    assert not res.L.any() and not res.S.any()


def test_outlier_row_has_largest_sparse_norm():
    rng = np.random.default_rng(3)
    D = np.outer(rng.uniform(0.5, 1.5, 60), rng.uniform(0.5, 1.5, 30))
    D[17] = 10.0
    res = rpca_ialm(D)
    assert res.converged
    norms = np.linalg.norm(res.S, axis=1)
    assert np.argmax(norms) == 17


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 120))
def test_feasibility_and_objective(seed, m):
    # below ~20 rows the 1.5 penalty growth can stop above the trivial point
    # (feasible but not optimal); pipeline matrices are far taller
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(m, 30))
    lam = 1 / np.sqrt(m)
    res = rpca_ialm(D, lam)
    assert res.converged
    assert np.linalg.norm(D - res.L - res.S) / np.linalg.norm(D) <= 1e-7
    # never worse than the trivial feasible point L = D, S = 0
    assert objective(res.L, res.S, lam) <= objective(D, np.zeros_like(D), lam) + 1e-6


def test_small_wide_matrices_stay_feasible():
    for seed in range(10):
        D = np.random.default_rng(seed).normal(size=(5, 30))
        res = rpca_ialm(D)
        assert res.converged
        assert np.linalg.norm(D - res.L - res.S) / np.linalg.norm(D) <= 1e-7


def test_row_permutation_equivariance():
    rng = np.random.default_rng(4)
    for _ in range(5):
        D = rng.normal(size=(50, 30))
        perm = rng.permutation(50)
        a = rpca_ialm(D)
        b = rpca_ialm(D[perm])
        np.testing.assert_allclose(b.S, a.S[perm], atol=1e-9)
        np.testing.assert_allclose(b.L, a.L[perm], atol=1e-9)


def test_huge_lambda_gives_empty_sparse_part():
    D = np.random.default_rng(5).normal(size=(30, 30))
    res = rpca_ialm(D, lam=1e6)
    assert np.abs(res.S).max() == 0.0
    np.testing.assert_allclose(res.L, D, atol=1e-6 * np.linalg.norm(D))


def test_max_iter_flags_non_convergence():
    D = np.random.default_rng(6).normal(size=(40, 30))
    with pytest.warns(UserWarning):
        res = rpca_ialm(D, max_iter=2)
    assert not res.converged and res.iterations == 2


def test_distinctness_examples():
    pix = np.array([[0, 0], [0, 1]])
    f = distinctness(np.zeros((2, 30)), pix)
    assert not f.raw.any() and not f.normalized.any()
    row = np.zeros((1, 30))
    row[0, :2] = [3, 4]
    f = distinctness(row, pix[:1])
    assert f.raw[0] == 5.0 and f.normalized[0] == 1.0
    S = np.zeros((2, 30))
    S[0, 0], S[1, 1] = 1, 2
    np.testing.assert_array_equal(distinctness(S, pix).normalized, [0.5, 1.0])
    with pytest.raises(ValueError):
        distinctness(S, pix[:1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_normalized_max_is_one(seed):
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(12, 30)) * (rng.random((12, 30)) < 0.2)
    if not S.any():
        S[0, 0] = 1.0
    f = distinctness(S, np.argwhere(np.ones((3, 4), bool)))
    assert f.normalized.max() == 1.0
    assert np.all((0 <= f.normalized) & (f.normalized <= 1))


def test_cross_limbs_more_distinct_than_body():
    mask, limb = cross_with_labels()
    fm = build_feature_matrix(mask, CANONICAL_SPACES[1])
    res = rpca_ialm(fm.D)
    fld = distinctness(res.S, fm.pixel_index)
    grid = fld.to_grid(mask.shape)
    body = mask.grid & ~limb
    assert grid[limb].mean() > grid[body].mean()
