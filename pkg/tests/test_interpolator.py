import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import linalg

from benignlab.errors import DimensionMismatch, GramSingular
from benignlab.interpolator import gram, gram_extremes, min_norm_fit, pinv_min_norm


def test_single_row_examples():
    np.testing.assert_allclose(min_norm_fit([[1.0, 0.0]], [2.0]).theta_hat, [2.0, 0.0])
    th = min_norm_fit([[1.0, 1.0]], [2.0]).theta_hat
    np.testing.assert_allclose(th, [1.0, 1.0])
    assert np.linalg.norm(th) < np.linalg.norm([2.0, 0.0])


def full_svd_oracle(X, y):
    # X^T (X X^T)^{-1} y with the inverse taken from a full SVD of X X^T
    U, s, Vt = np.linalg.svd(X @ X.T)
    return X.T @ (Vt.T @ ((U.T @ y) / s))


def test_matches_svd_oracle(rng):
    X = rng.standard_normal((5, 12))
    y = rng.standard_normal(5)
    th = min_norm_fit(X, y).theta_hat
    np.testing.assert_allclose(th, full_svd_oracle(X, y), rtol=1e-9)
    np.testing.assert_allclose(th, pinv_min_norm(X, y), rtol=1e-9)


def test_gram_examples():
    np.testing.assert_array_equal(gram(np.eye(2)), np.eye(2))
    n = 4
    X = np.sqrt(n) * np.eye(n, 7)
    np.testing.assert_allclose(gram(X), n * np.eye(n))
    assert gram_extremes(gram(X)) == pytest.approx((n, n))


def test_gram_vs_triple_loop(rng):
    X = rng.standard_normal((6, 9))
    G = np.zeros((6, 6))
    for i in range(6):
        for j in range(6):
            for k in range(9):
                G[i, j] += X[i, k] * X[j, k]
    np.testing.assert_allclose(gram(X), G, rtol=1e-12, atol=1e-12)


def test_singular_gram():
    X = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
    with pytest.raises(GramSingular):
        min_norm_fit(X, [1.0, 2.0])
    fit = min_norm_fit(X, [1.0, 2.0], allow_degenerate=True)
    assert fit.degenerate
    np.testing.assert_allclose(fit.theta_hat, pinv_min_norm(X, [1.0, 2.0]))


def test_dimension_check():
    with pytest.raises(DimensionMismatch):
        min_norm_fit(np.eye(2, 3), [1.0])


@st.composite
def problems(draw):
    n = draw(st.integers(1, 8))
    p = draw(st.integers(n + 1, 16))
    seed = draw(st.integers(0, 2**31))
    r = np.random.default_rng(seed)
    return r.standard_normal((n, p)), r.standard_normal(n), r


@given(problems())
def test_minimality(prob):
    X, y, r = prob
    th = min_norm_fit(X, y).theta_hat
    N = linalg.null_space(X)
    delta = N @ r.standard_normal(N.shape[1])
    delta /= np.linalg.norm(delta)
    assert abs(th @ delta) <= 1e-9 * max(1.0, np.linalg.norm(th))
    for t in (-1.0, 1e-3, 2.0):
        assert np.linalg.norm(th + t * delta) > np.linalg.norm(th)


@given(problems(), st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3))
def test_scale_equivariance(prob, c):
    X, y, _ = prob
    a = min_norm_fit(X, c * y).theta_hat
    b = c * min_norm_fit(X, y).theta_hat
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())


@given(problems())
def test_interpolates_and_noiseless_recovery(prob):
    X, _, r = prob
    theta_star = X.T @ r.standard_normal(X.shape[0])
    fit = min_norm_fit(X, X @ theta_star)
    np.testing.assert_allclose(fit.theta_hat, theta_star, rtol=1e-7, atol=1e-9)
    assert fit.interpolation_residual <= 1e-8 * max(1.0, np.abs(X @ theta_star).max())


@given(arrays(np.float64, (3, 5), elements=st.floats(-10, 10)))
def test_gram_symmetric(X):
    G = gram(X)
    np.testing.assert_array_equal(G, G.T)
