import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from benignlab.errors import ConfigError, DimensionMismatch, SizeCapExceeded
from benignlab.sampling import (
    Z_DISTS, RegressionInstance, make_response, make_theta_star, read_design_csv, rng_for,
    sample_design, sample_noise, sample_z, write_design_csv,
)
from benignlab.spectrum import Constant, Geometric


def inst(lam, n, **kw):
    lam = np.asarray(lam, dtype=float)
    return RegressionInstance(lam, n, np.zeros(len(lam)), **kw)


def test_rademacher_scaling():
    X = sample_design(inst([4.0, 1.0], 50, z_dist="rademacher", seed=3)).X
    assert set(np.unique(X[:, 0])) <= {-2.0, 2.0}
    assert set(np.unique(X[:, 1])) <= {-1.0, 1.0}


def test_empirical_covariance_identity():
    X = sample_design(inst(np.ones(50), 2000, seed=7)).X
    C = X.T @ X / 2000
    assert np.max(np.abs(C - np.eye(50))) < 0.15


def test_empirical_covariance_diagonal():
    lam = np.array([3.0, 1.0, 0.25])
    X = sample_design(inst(lam, 20000, seed=1)).X
    C = X.T @ X / 20000
    np.testing.assert_allclose(C, np.diag(lam), atol=0.15)


def test_design_independent_of_sigma():
    a = sample_design(inst(np.ones(5), 4, sigma=0.1, seed=9)).X
    b = sample_design(inst(np.ones(5), 4, sigma=3.0, seed=9)).X
    np.testing.assert_array_equal(a, b)


def test_noise_examples():
    i0 = inst(np.ones(3), 6, sigma=0.0)
    eps = sample_noise(i0)
    assert np.all(eps == 0)
    X = sample_design(i0).X
    theta = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(make_response(X, theta, eps), X @ theta)
    big = inst(np.ones(1), 100_000, sigma=1.0, seed=2)
    v = sample_noise(big).var()
    assert 0.97 <= v <= 1.03
    np.testing.assert_array_equal(sample_noise(big), sample_noise(big))


@pytest.mark.parametrize("dist", Z_DISTS)
def test_unit_variance_z(dist):
    z = sample_z(rng_for(11, 0), 1_000_000, dist)
    assert abs(z.mean()) <= 0.005
    assert 0.99 <= z.var() <= 1.01


@pytest.mark.parametrize("dist", Z_DISTS)
@given(seed=st.integers(0, 2**32 - 1), replica=st.integers(0, 50))
def test_determinism(dist, seed, replica):
    i = inst([2.0, 1.0, 0.5], 4, z_dist=dist, seed=seed)
    np.testing.assert_array_equal(sample_design(i, replica).X, sample_design(i, replica).X)
    np.testing.assert_array_equal(sample_noise(i, replica), sample_noise(i, replica))


def test_replicas_differ():
    i = inst(np.ones(4), 3, seed=1)
    assert not np.array_equal(sample_design(i, 0).X, sample_design(i, 1).X)


def test_theta_star_modes():
    np.testing.assert_array_equal(make_theta_star(3, 2.0, "first"), [2.0, 0, 0])
    for seed in range(5):
        t = make_theta_star(40, 1.0, "uniform", seed=seed)
        assert np.linalg.norm(t) == pytest.approx(1.0, abs=1e-12)
    assert np.all(make_theta_star(4, 0.0, "uniform") == 0)
    t = make_theta_star(2, 5.0, "explicit", vector=[3.0, 4.0])
    np.testing.assert_allclose(t, [3.0, 4.0])
    with pytest.raises(DimensionMismatch):
        make_theta_star(3, 1.0, "explicit", vector=[1.0])
    with pytest.raises(ConfigError):
        make_theta_star(3, 1.0, "sideways")


def test_instance_validation():
    with pytest.raises(DimensionMismatch):
        RegressionInstance(np.ones(3), 2, np.ones(2))
    with pytest.raises(ConfigError):
        inst(np.ones(3), 2, z_dist="cauchy")
    with pytest.raises(ConfigError):
        inst(np.ones(3), 2, sigma=-1)
    with pytest.raises(ConfigError):
        RegressionInstance.from_spectrum(Geometric(0.5), 3, np.ones(3))
    with pytest.raises(SizeCapExceeded):
        sample_design(inst(np.ones(8192), 1025))
    i = RegressionInstance.from_spectrum(Constant(4), 3, np.ones(4))
    assert i.p == 4


def test_design_csv_round_trip(tmp_path):
    X = sample_design(inst([1.0, 0.3], 5, seed=4)).X
    path = tmp_path / "X.csv"
    write_design_csv(X, path)
    np.testing.assert_array_equal(read_design_csv(path), X)
