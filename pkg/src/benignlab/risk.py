"""Excess risk of the minimum-norm interpolant: exact terms and Monte Carlo.

Given X (n x p) in the eigenbasis of Sigma = diag(lam), the expected excess
risk over Gaussian noise is ``bias_term + sigma**2 * trace_c`` with

    bias_term = theta*^T B theta*,  B = (I - P) Sigma (I - P),  P = X^T G^{-1} X
    trace_c   = tr(G^{-1} X Sigma X^T G^{-1}),                  G = X X^T

Neither B nor P is formed; everything goes through n x n solves.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionMismatch, GramSingular, MonteCarloAborted
from .interpolator import DEFAULT_RCOND, GramSolver, min_norm_fit
from .sampling import (
    PROBE_STREAM,
    RegressionInstance,
    check_desk_scale,
    make_response,
    rng_for,
    sample_design,
    sample_noise,
    sample_z,
)
from .spectrum import Spectrum

MC_CHUNK = 250
MAX_FAILED_FRACTION = 0.10


def _lam(spectrum) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        if spectrum.length is None:
            raise DimensionMismatch("risk computations need a finite spectrum")
        return spectrum.eigenvalues(1, spectrum.length)
    return np.asarray(spectrum, dtype=np.float64)


def _X(X) -> np.ndarray:
    return np.asarray(getattr(X, "X", X))


def excess_risk(theta, theta_star, spectrum) -> float:
    """(theta - theta*)^T Sigma (theta - theta*)."""
    lam = _lam(spectrum)
    d = np.asarray(theta, dtype=np.float64) - np.asarray(theta_star, dtype=np.float64)
    if d.shape != lam.shape:
        raise DimensionMismatch(f"vectors of shape {d.shape} vs spectrum of length {len(lam)}")
    return float(np.dot(lam, d * d))


def bias_term(X, spectrum, theta_star, rcond: float = DEFAULT_RCOND,
              solver: GramSolver | None = None) -> float:
    """theta*^T B theta* = ||Sigma^{1/2} (theta* - P theta*)||^2."""
    X = _X(X)
    lam = _lam(spectrum)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    solver = solver or GramSolver(X, rcond)
    resid = theta_star - X.T @ solver.solve(X @ theta_star)
    return float(np.dot(lam, resid * resid))


def variance_trace_direct(X, spectrum, rcond: float = DEFAULT_RCOND,
                          solver: GramSolver | None = None) -> float:
    """tr(C) from two n x n Cholesky solves against M = X Sigma X^T."""
    X = _X(X)
    lam = _lam(spectrum)
    solver = solver or GramSolver(X, rcond)
    M = (X * lam) @ X.T
    Y = solver.solve(M)
    C = solver.solve(Y.T)
    return float(np.trace(C))


def _z_columns(X: np.ndarray, lam: np.ndarray):
    keep = np.flatnonzero(lam > 0)
    lam_k = lam[keep]
    Z = X[:, keep] / np.sqrt(lam_k)
    return Z, lam_k, keep


def variance_trace_z(X, spectrum, rcond: float = DEFAULT_RCOND) -> float:
    """tr(C) = sum_i lam_i^2 z_i^T A^{-2} z_i with A = sum_j lam_j z_j z_j^T.

    Only directions with lam_i > 0 enter. A is handled through its symmetric
    eigendecomposition, independently of the Cholesky path above.
    """
    X = _X(X)
    Z, lam, _ = _z_columns(X, _lam(spectrum))
    A = (Z * lam) @ Z.T
    A = (A + A.T) / 2
    d, U = linalg.eigh(A)
    if not d[0] >= rcond * d[-1] or d[-1] <= 0:
        raise GramSingular(float(d[0]), float(d[-1]), rcond)
    W = (U.T @ Z) / d[:, None]
    return float(np.dot(lam * lam, np.einsum("ij,ij->j", W, W)))


@dataclass
class SMWTerm:
    index: int
    lhs: float
    rhs: float
    skipped: bool = False

    @property
    def rel_error(self) -> float:
        if self.skipped:
            return math.nan
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), np.finfo(float).tiny)


def smw_terms(X, spectrum, indices, rcond: float = DEFAULT_RCOND) -> list[SMWTerm]:
    """Both sides of the per-direction leave-one-out identity

        lam_i^2 z_i^T A^{-2} z_i = lam_i^2 z_i^T A_{-i}^{-2} z_i / (1 + lam_i z_i^T A_{-i}^{-1} z_i)^2

    for each 0-based column index in ``indices`` (zero-eigenvalue columns are
    skipped). A_{-i} is assembled from the other columns, not by downdating.
    """
    X = _X(X)
    lam_all = _lam(spectrum)
    Z, lam, keep = _z_columns(X, lam_all)
    A = (Z * lam) @ Z.T
    A = (A + A.T) / 2
    A_solver = linalg.cho_factor(A, lower=True)
    pos = {int(c): j for j, c in enumerate(keep)}
    out = []
    for i in indices:
        i = int(i)
        if i not in pos:
            out.append(SMWTerm(i, math.nan, math.nan, skipped=True))
            continue
        j = pos[i]
        z, li = Z[:, j], lam[j]
        lhs = li * li * float(np.sum(linalg.cho_solve(A_solver, z) ** 2))
        mask = np.ones(len(lam), dtype=bool)
        mask[j] = False
        Am = (Z[:, mask] * lam[mask]) @ Z[:, mask].T
        Am = (Am + Am.T) / 2
        ev = linalg.eigvalsh(Am)
        if not ev[0] >= rcond * ev[-1] or ev[-1] <= 0:
            out.append(SMWTerm(i, lhs, math.nan, skipped=True))
            continue
        a = linalg.cho_solve(linalg.cho_factor(Am, lower=True), z)
        rhs = li * li * float(a @ a) / (1.0 + li * float(z @ a)) ** 2
        out.append(SMWTerm(i, lhs, rhs))
    return out


def smw_identity(A, Z) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of Z^T (Z Z^T + A)^{-2} Z = (I + M1)^{-1} M2 (I + M1)^{-1}.

    M1 = Z^T A^{-1} Z and M2 = Z^T A^{-2} Z; A is n x n invertible, Z is n x k.
    """
    A = np.asarray(A, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    S = Z @ Z.T + A
    lhs = Z.T @ np.linalg.solve(S, np.linalg.solve(S, Z))
    AiZ = np.linalg.solve(A, Z)
    M1 = Z.T @ AiZ
    M2 = Z.T @ np.linalg.solve(A, AiZ)
    K = np.linalg.inv(np.eye(Z.shape[1]) + M1)
    return lhs, K @ M2 @ K


# ---------------------------------------------------------------------------
# reports


@dataclass
class RiskReport:
    n: int
    p: int
    sigma: float
    seed: int
    mode: str
    bias_term: float
    trace_c: float
    trace_c_alt: float | None
    expected_risk_given_X: float
    mc_mean: float | None = None
    mc_stderr: float | None = None
    replicas: int = 0
    failed: int = 0
    gram_min_eig: float | None = None
    gram_max_eig: float | None = None
    degenerate: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def exact_risk(instance: RegressionInstance, rcond: float = DEFAULT_RCOND,
               with_alt: bool = True) -> RiskReport:
    """Bias and trace terms for the design drawn at replica 0."""
    check_desk_scale(instance.n, instance.p)
    X = sample_design(instance).X
    solver = GramSolver(X, rcond)
    b = bias_term(X, instance.lam, instance.theta_star, solver=solver)
    tc = variance_trace_direct(X, instance.lam, solver=solver)
    alt = variance_trace_z(X, instance.lam, rcond) if with_alt else None
    return RiskReport(
        instance.n, instance.p, instance.sigma, instance.seed, "exact",
        b, tc, alt, b + instance.sigma**2 * tc,
        gram_min_eig=solver.min_eig, gram_max_eig=solver.max_eig,
    )


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    m = math.fsum(values) / len(values)
    var = math.fsum((v - m) ** 2 for v in values) / (len(values) - 1)
    return m, math.sqrt(var / len(values))


def _chunks(total: int, size: int = MC_CHUNK) -> list[range]:
    return [range(s, min(s + size, total)) for s in range(0, total, size)]


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def mc_risk(instance: RegressionInstance, replicas: int, mode: str = "fixed",
            rcond: float = DEFAULT_RCOND, threads: int = 1,
            allow_degenerate: bool = False) -> RiskReport:
    """Monte Carlo excess risk.

    ``fixed``: one design (replica 0), ``replicas`` independent noise draws;
    the report also carries the exact expectation given that design.
    ``full``: a fresh design and noise vector per replica; exact columns are
    averages over replicas. Replica seeds are keyed by replica index and
    chunk boundaries do not depend on ``threads``, so output is identical
    for any thread count.
    """
    if replicas < 2:
        raise ConfigError("replicas must be >= 2")
    if mode in ("fixed", "FixedDesign"):
        return _mc_fixed(instance, replicas, rcond, threads)
    if mode in ("full", "FullResample"):
        return _mc_full(instance, replicas, rcond, threads, allow_degenerate)
    raise ConfigError(f"unknown Monte Carlo mode {mode!r}")


def _mc_fixed(inst: RegressionInstance, replicas: int, rcond: float, threads: int) -> RiskReport:
    check_desk_scale(inst.n, inst.p)
    X = sample_design(inst).X
    solver = GramSolver(X, rcond)
    lam, theta = inst.lam, inst.theta_star
    base = solver.fit(X @ theta) - theta

    def run(chunk: range) -> list[float]:
        E = np.column_stack([sample_noise(inst, r) for r in chunk])
        D = base[:, None] + X.T @ solver.solve(E)
        return [float(v) for v in lam @ (D * D)]

    risks = [v for part in _map(run, _chunks(replicas), threads) for v in part]
    b = bias_term(X, lam, theta, solver=solver)
    tc = variance_trace_direct(X, lam, solver=solver)
    alt = variance_trace_z(X, lam, rcond)
    mean, se = _mean_stderr(risks)
    return RiskReport(
        inst.n, inst.p, inst.sigma, inst.seed, "FixedDesign", b, tc, alt,
        b + inst.sigma**2 * tc, mean, se, replicas, 0, solver.min_eig, solver.max_eig,
    )


def _full_replica(inst: RegressionInstance, r: int, rcond: float, allow_degenerate: bool):
    X = sample_design(inst, r).X
    y = make_response(X, inst.theta_star, sample_noise(inst, r))
    try:
        solver = GramSolver(X, rcond)
    except GramSingular:
        if not allow_degenerate:
            return None
        fit = min_norm_fit(X, y, rcond, allow_degenerate=True)
        risk = excess_risk(fit.theta_hat, inst.theta_star, inst.lam)
        return risk, math.nan, math.nan, True
    risk = excess_risk(solver.fit(y), inst.theta_star, inst.lam)
    b = bias_term(X, inst.lam, inst.theta_star, solver=solver)
    tc = variance_trace_direct(X, inst.lam, solver=solver)
    return risk, b, tc, False


def _mc_full(inst, replicas, rcond, threads, allow_degenerate) -> RiskReport:
    check_desk_scale(inst.n, inst.p)

    def run(chunk: range):
        return [_full_replica(inst, r, rcond, allow_degenerate) for r in chunk]

    results = [v for part in _map(run, _chunks(replicas, 16), threads) for v in part]
    ok = [res for res in results if res is not None]
    failed = replicas - len(ok)
    if failed > MAX_FAILED_FRACTION * replicas or len(ok) < 2:
        raise MonteCarloAborted(f"{failed} of {replicas} replicas had a singular Gram matrix")
    mean, se = _mean_stderr([res[0] for res in ok])
    exact = [res for res in ok if not res[3]]
    if exact:
        b = math.fsum(res[1] for res in exact) / len(exact)
        tc = math.fsum(res[2] for res in exact) / len(exact)
    else:
        b = tc = math.nan
    return RiskReport(
        inst.n, inst.p, inst.sigma, inst.seed, "FullResample", b, tc, None,
        b + inst.sigma**2 * tc, mean, se, replicas, failed,
        degenerate=len(ok) - len(exact),
    )


# ---------------------------------------------------------------------------
# eigenvalue concentration of A_k = sum_{i>k} lam_i z_i z_i^T


@dataclass
class ProbeReport:
    n: int
    k: int
    seeds: int
    scale: float
    top_ratios: list[float] = field(default_factory=list)
    bottom_ratios: list[float] = field(default_factory=list)

    @staticmethod
    def _summary(v: list[float]) -> dict:
        return {"min": min(v), "median": statistics.median(v), "max": max(v)}

    def summary(self) -> dict:
        return {"top": self._summary(self.top_ratios), "bottom": self._summary(self.bottom_ratios)}

    def to_dict(self) -> dict:
        return {**asdict(self), "summary": self.summary()}


def eigen_concentration_probe(spectrum, n: int, k: int, seeds: int = 20,
                              z_dist: str = "gaussian", seed: int = 0,
                              threads: int = 1) -> ProbeReport:
    """mu_1(A_k) and mu_n(A_k) relative to sum_{i>k} lam_i + lam_{k+1} n, per seed.

    Records only; the concentration regime (r_k large against n) is not
    asserted here.
    """
    lam = _lam(spectrum)
    p = len(lam)
    if not 0 <= k < p:
        raise ConfigError(f"need 0 <= k < p={p}, got {k}")
    check_desk_scale(n, p)
    tail = lam[k:]
    scale = float(math.fsum(tail) + lam[k] * n)

    def run(s: int) -> tuple[float, float]:
        Z = sample_z(rng_for(seed, PROBE_STREAM, s), (n, p - k), z_dist)
        A = (Z * tail) @ Z.T
        ev = linalg.eigvalsh((A + A.T) / 2)
        # fewer than n tail directions: A_k is rank deficient by construction
        bottom = 0.0 if np.count_nonzero(tail) < n else float(ev[0])
        return float(ev[-1]) / scale, bottom / scale

    res = _map(run, range(seeds), threads)
    return ProbeReport(n, k, seeds, scale, [r[0] for r in res], [r[1] for r in res])
