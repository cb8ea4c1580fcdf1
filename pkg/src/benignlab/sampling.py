"""Seeded generation of regression instances in the covariance eigenbasis.

Rows are x = Lambda^{1/2} z with z having independent mean-zero, unit-variance
coordinates. Each random stream (design, noise, theta direction, probe) is a
separate child of ``SeedSequence(seed)`` keyed by ``(stream, replica)``, so
replicas can be generated in any order or in parallel with identical output.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, SizeCapExceeded
from .spectrum import Spectrum

MAX_N = 1024
MAX_P = 8192

DESIGN_STREAM = 0
NOISE_STREAM = 1
THETA_STREAM = 2
PROBE_STREAM = 3

Z_DISTS = ("gaussian", "rademacher", "uniform")


def check_desk_scale(n: int, p: int) -> None:
    """Size cap for the Gram-based risk computations."""
    if n > MAX_N or p > MAX_P:
        raise SizeCapExceeded(f"n={n}, p={p} exceeds the supported scale n <= {MAX_N}, p <= {MAX_P}")


def check_design_size(n: int, p: int) -> None:
    """Memory cap for a sampled design: n * p entries at most MAX_N * MAX_P."""
    if n * p > MAX_N * MAX_P:
        raise SizeCapExceeded(f"design of {n} x {p} exceeds {MAX_N * MAX_P} entries")


def rng_for(seed: int, stream: int, replica: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(replica)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_z(rng: np.random.Generator, shape, dist: str = "gaussian") -> np.ndarray:
    """Mean-zero, unit-variance i.i.d. draws."""
    if dist == "gaussian":
        return rng.standard_normal(shape)
    if dist == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    if dist == "uniform":
        s = math.sqrt(3.0)
        return rng.uniform(-s, s, size=shape)
    raise ConfigError(f"unknown z distribution {dist!r}; choose from {Z_DISTS}")


@dataclass(frozen=True, eq=False)
class RegressionInstance:
    """Eigenbasis regression problem: covariance diag(lam), y = x.theta* + noise.

    ``sigma`` is the noise standard deviation; for these homoscedastic
    generators it also plays the role of the subgaussian noise scale.
    """

    lam: np.ndarray
    n: int
    theta_star: np.ndarray
    sigma: float = 1.0
    z_dist: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        lam = np.array(self.lam, dtype=np.float64)
        theta = np.array(self.theta_star, dtype=np.float64)
        if lam.ndim != 1 or len(lam) < 1:
            raise ConfigError("spectrum must be a nonempty vector")
        if theta.shape != lam.shape:
            raise DimensionMismatch(f"theta_star has shape {theta.shape}, expected {lam.shape}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.z_dist not in Z_DISTS:
            raise ConfigError(f"unknown z distribution {self.z_dist!r}")
        for a in (lam, theta):
            a.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "theta_star", theta)

    @classmethod
    def from_spectrum(cls, spec: Spectrum, n: int, theta_star, **kw) -> "RegressionInstance":
        if spec.length is None:
            raise ConfigError("sampling needs a finite spectrum; truncate it first")
        return cls(spec.eigenvalues(1, spec.length), n, theta_star, **kw)

    @property
    def p(self) -> int:
        return len(self.lam)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.lam.tobytes())
        h.update(f"{self.n}|{self.z_dist}".encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    X: np.ndarray
    instance_hash: str
    seed: int
    replica: int = 0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def sample_design(instance: RegressionInstance, replica: int = 0) -> DesignMatrix:
    """n x p design with rows (sqrt(lam_1) z_1, ..., sqrt(lam_p) z_p)."""
    check_design_size(instance.n, instance.p)
    rng = rng_for(instance.seed, DESIGN_STREAM, replica)
    Z = sample_z(rng, (instance.n, instance.p), instance.z_dist)
    X = Z * np.sqrt(instance.lam)
    return DesignMatrix(X, instance.digest(), instance.seed, replica)


def sample_noise(instance: RegressionInstance, replica: int = 0) -> np.ndarray:
    """Gaussian noise with standard deviation sigma, from the noise stream."""
    if instance.sigma == 0:
        return np.zeros(instance.n)
    rng = rng_for(instance.seed, NOISE_STREAM, replica)
    return instance.sigma * rng.standard_normal(instance.n)


def make_response(X, theta_star, eps) -> np.ndarray:
    X = getattr(X, "X", X)
    return X @ np.asarray(theta_star) + np.asarray(eps)


def make_theta_star(p: int, t: float, mode: str = "first", seed: int = 0,
                    vector=None) -> np.ndarray:
    """A coefficient vector of Euclidean norm t.

    Modes: ``first`` (t e_1), ``uniform`` (uniform direction on the sphere,
    seeded) and ``explicit`` (``vector`` rescaled to norm t).
    """
    if t < 0:
        raise ConfigError("theta norm must be >= 0")
    if mode == "explicit":
        v = np.asarray(vector, dtype=np.float64)
        if v.shape != (p,):
            raise DimensionMismatch(f"explicit theta has shape {v.shape}, expected ({p},)")
    elif mode == "first":
        v = np.zeros(p)
        v[0] = 1.0
    elif mode == "uniform":
        v = rng_for(seed, THETA_STREAM).standard_normal(p)
    else:
        raise ConfigError(f"unknown theta mode {mode!r}")
    if t == 0:
        return np.zeros(p)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ConfigError("explicit theta direction is the zero vector")
    return v * (t / norm)


def write_design_csv(design: DesignMatrix | np.ndarray, path) -> None:
    X = getattr(design, "X", design)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def read_design_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])
