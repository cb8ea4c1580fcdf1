"""Effective ranks r_k, R_k, the k* threshold and related rank facts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FiniteRankRequired, NotApplicable, RankUndefined
from .spectrum import DEFAULT_TOL, ExplicitSpectrum, Spectrum

DEFAULT_B = 5.0


class _Infinity:
    """Tagged 'no such k' value; deliberately supports no arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "inf"

    __str__ = __repr__

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(k) -> bool:
    return k is INF


def _normalized_tails(spec: Spectrum, k: int, tol: float) -> tuple[float, float, float]:
    """(lambda_{k+1}, r_k, r_k(Sigma^2)); infinities flag a divergent tail.

    Ranks are scale invariant, so finite explicit tails are summed after
    dividing by lambda_{k+1}; squares of tiny eigenvalues then cannot underflow.
    """
    lam = spec.eigenvalue(k + 1)
    if lam <= 0:
        raise RankUndefined(k)
    if isinstance(spec, ExplicitSpectrum) and spec.remainder == 0.0:
        v = spec.values[k:][::-1] / lam
        return lam, float(np.sum(v)), float(np.sum(v * v))
    t1 = spec.tail_sum(k, 1, tol)
    if t1.infinite:
        return lam, math.inf, math.inf
    t2 = spec.tail_sum(k, 2, tol)
    return lam, t1.value / lam, (t2.value / lam) / lam


def effective_rank_r(spec: Spectrum, k: int, tol: float = DEFAULT_TOL) -> float:
    """r_k = sum_{i>k} lambda_i / lambda_{k+1}; math.inf if the tail diverges."""
    lam = spec.eigenvalue(k + 1)
    if lam <= 0:
        raise RankUndefined(k)
    if isinstance(spec, ExplicitSpectrum) and spec.remainder == 0.0:
        return float(np.sum(spec.values[k:][::-1] / lam))
    ts = spec.tail_sum(k, 1, tol)
    return math.inf if ts.infinite else ts.value / lam


def effective_rank_R(spec: Spectrum, k: int, tol: float = DEFAULT_TOL) -> float:
    """R_k = (sum_{i>k} lambda_i)**2 / sum_{i>k} lambda_i**2."""
    _, r, r_sq = _normalized_tails(spec, k, tol)
    return math.inf if math.isinf(r) else r * r / r_sq


@dataclass
class Tails:
    """lambda_{k+1}, sum_{i>k} lambda_i and sum_{i>k} lambda_i**2 for k = 0..K."""

    lam_next: np.ndarray
    t1: np.ndarray
    t2: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return self.t1 / self.lam_next

    @property
    def R(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(self.t1), np.inf, self.t1**2 / self.t2)

    @property
    def r_sq(self) -> np.ndarray:
        """r_k(Sigma**2)."""
        return self.t2 / self.lam_next**2


def tails(spec: Spectrum, k_max: int, tol: float = DEFAULT_TOL) -> Tails:
    """Tail sums for every k in [0, k_max] restricted to lambda_{k+1} > 0.

    The far tail past k_max is taken once from ``tail_sum`` and the rest is
    accumulated from the explicit eigenvalues, smallest first.
    """
    if k_max < 0:
        raise ConfigError("k_max must be >= 0")
    if spec.rank is not None:
        k_max = min(k_max, spec.rank - 1)
    lam = spec.eigenvalues(1, k_max + 1)
    # squares of smaller values underflow, leaving R_k meaningless
    positive = lam * lam > np.finfo(np.float64).tiny
    if not positive.all():
        k_max = int(np.argmin(positive)) - 1
        lam = lam[: k_max + 1]
    if k_max < 0:
        return Tails(np.empty(0), np.empty(0), np.empty(0))
    out = []
    for power in (1, 2):
        far = spec.tail_sum(k_max + 1, power, tol)
        if far.infinite:
            out.append(np.full(k_max + 1, np.inf))
            continue
        suffix = np.cumsum((lam**power)[::-1])[::-1]
        out.append(suffix + far.value)
    return Tails(lam, out[0], out[1])


@dataclass
class RankProfile:
    n: int | None
    b: float
    k_max: int
    r: np.ndarray
    R: np.ndarray
    k_star: object = INF
    k_star_reason: str = ""
    variance_term: float | None = None

    @property
    def k_range(self) -> tuple[int, int]:
        return (0, len(self.r) - 1)

    def header(self) -> dict:
        return {
            "n": self.n,
            "b": self.b,
            "k_star": self.k_star if not is_inf(self.k_star) else "inf",
            "k_star_reason": self.k_star_reason or None,
            "variance_term": self.variance_term,
        }


def default_k_max(spec: Spectrum, n: int) -> int:
    k = 10 * n
    if spec.length is not None:
        k = min(k, spec.length - 1)
    return max(k, 0)


def _first_k_star(r: np.ndarray, threshold: float) -> int | None:
    hits = np.flatnonzero(r >= threshold)
    return int(hits[0]) if len(hits) else None


def rank_profile(spec: Spectrum, n: int | None = None, b: float = DEFAULT_B,
                 k_max: int | None = None, tol: float = DEFAULT_TOL) -> RankProfile:
    if n is not None and n < 1:
        raise ConfigError("n must be >= 1")
    if b <= 1:
        raise ConfigError(f"b must exceed 1, got {b}")
    if k_max is None:
        if n is None:
            raise ConfigError("rank_profile needs n or k_max")
        k_max = default_k_max(spec, n)
    t = tails(spec, k_max, tol)
    prof = RankProfile(n, b, k_max, t.r, t.R)
    if n is None:
        return prof
    ks = _first_k_star(t.r, b * n)
    if ks is None:
        exhausted = spec.rank is not None and len(t.r) == spec.rank
        prof.k_star_reason = "finite rank below bn" if exhausted else "not reached within k_max"
    else:
        prof.k_star = ks
        prof.variance_term = float(ks / n + n / t.R[ks])
    return prof


def k_star(spec: Spectrum, n: int, b: float = DEFAULT_B, k_max: int | None = None,
           tol: float = DEFAULT_TOL):
    """min{k <= k_max : r_k >= b n}, or INF."""
    return rank_profile(spec, n, b, k_max, tol).k_star


def symmetry_factors(spec: Spectrum, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """(s, S) with r_0 = rank * s and R_0 = rank * S."""
    p = spec.rank
    if p is None:
        raise FiniteRankRequired(f"{spec.variant} spectrum has infinite rank")
    if p == 0:
        raise FiniteRankRequired("spectrum has no positive eigenvalue")
    t1 = spec.tail_sum(0, 1, tol).value
    t2 = spec.tail_sum(0, 2, tol).value
    mean = t1 / p
    return mean / spec.norm, mean**2 / (t2 / p)


@dataclass
class RankIdentityReport:
    k: int
    r: float
    r_sq: float
    R: float
    relations: dict[str, bool] = field(default_factory=dict)
    residual: float = 0.0
    verdict: str = "pass"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _identity_relations(r, r_sq, R, tol):
    slack = 1 + tol
    return {
        "r_ge_1": r * slack >= 1,
        "r_sq_le_r": r_sq <= r * slack,
        "r_le_R": r <= R * slack,
        "R_le_r2": R <= r**2 * slack,
        "product": abs(r**2 - r_sq * R) <= tol * r**2,
    }


def rank_identities_check(spec: Spectrum, k: int, tol: float = 1e-8) -> RankIdentityReport:
    """Check r_k >= 1, r_k(S^2) <= r_k <= R_k <= r_k^2 and r_k^2 = r_k(S^2) R_k."""
    _, r, r_sq = _normalized_tails(spec, k, DEFAULT_TOL)
    if math.isinf(r):
        return RankIdentityReport(k, math.inf, math.inf, math.inf, verdict="inapplicable")
    R = r * r / r_sq
    rel = _identity_relations(r, r_sq, R, tol)
    return RankIdentityReport(
        k, r, r_sq, R, {k_: bool(v) for k_, v in rel.items()},
        residual=abs(r**2 - r_sq * R),
        verdict="pass" if all(rel.values()) else "fail",
    )


def rank_identities_table(spec: Spectrum, k_max: int, tol: float = 1e-8) -> dict[str, np.ndarray]:
    """Vectorised form of :func:`rank_identities_check` over k = 0..k_max."""
    t = tails(spec, k_max)
    r, r_sq, R = t.r, t.r_sq, t.R
    rel = _identity_relations(r, r_sq, R, tol)
    return {"r": r, "r_sq": r_sq, "R": R, **rel}


def phi(spec: Spectrum, k: int, n: int, b: float = DEFAULT_B) -> float:
    """k / (b^2 n) + n / R_k."""
    return k / (b * b * n) + n / effective_rank_R(spec, k)


@dataclass
class PhiMonotoneReport:
    n: int
    b: float
    checked: int
    violations: list[int]

    @property
    def passed(self) -> bool:
        return not self.violations


def phi_monotone_check(spec: Spectrum, n: int, b: float = DEFAULT_B,
                       k_max: int | None = None) -> PhiMonotoneReport:
    """Flag every k with r_k > b n but phi(k+1) <= phi(k)."""
    if k_max is None:
        k_max = spec.length - 1 if spec.length is not None else 10 * n
    t = tails(spec, k_max + 1)
    r, R = t.r, t.R
    ks = np.arange(len(r))
    ph = ks / (b * b * n) + n / R
    active = np.flatnonzero(r[:-1] > b * n)
    bad = active[ph[active + 1] <= ph[active]]
    return PhiMonotoneReport(n, b, len(active), [int(k) for k in bad])


@dataclass
class MinimizerResult:
    l_min: int
    value: float
    k_star: int
    expected: float

    @property
    def holds(self) -> bool:
        return self.l_min == self.k_star and math.isclose(self.value, self.expected, rel_tol=1e-8)


def variance_term_minimizer(spec: Spectrum, n: int, b: float = DEFAULT_B) -> MinimizerResult:
    """Brute-force min over l <= k* of l/(bn) + bn sum_{i>l} lambda_i^2 / (sum_{i>k*} lambda_i)^2.

    The minimum sits at l = k* with value k*/(bn) + bn/R_{k*}.
    """
    ks = k_star(spec, n, b)
    if is_inf(ks):
        raise NotApplicable(f"k* is infinite for n={n}, b={b}")
    t = tails(spec, ks)
    bn = b * n
    ls = np.arange(ks + 1)
    vals = ls / bn + bn * t.t2 / t.t1[ks] ** 2
    l_min = int(np.argmin(vals))
    expected = ks / bn + bn / t.R[ks]
    return MinimizerResult(l_min, float(vals[l_min]), ks, float(expected))


def r_recursion_errors(spec: Spectrum, k_max: int) -> np.ndarray:
    """Relative error of 1/R_{k+1} from the one-step recursion vs direct evaluation.

    1/R_{k+1} = (1/R_k - 1/r_k^2) / (1 - (2 - 1/r_k)/r_k)
    """
    t = tails(spec, k_max + 1)
    r, R = t.r, t.R
    if len(r) < 2:
        return np.empty(0)
    rk, Rk = r[:-1], R[:-1]
    # 1 - (2 - 1/r)/r written as (1 - 1/r)^2, which avoids one cancellation;
    # it vanishes when r_k = 1 (a single remaining eigenvalue)
    with np.errstate(divide="ignore", invalid="ignore"):
        rec = (1 / Rk - 1 / rk**2) / (1 - 1 / rk) ** 2
    direct = 1 / R[1:]
    return np.abs(rec - direct) / direct


def kstar_trend(spec: Spectrum, n_grid, b: float = DEFAULT_B) -> list[dict]:
    """k*(n)/n next to r_n/n over a grid of sample sizes."""
    rows = []
    for n in n_grid:
        ks = k_star(spec, n, b)
        rows.append({
            "n": n,
            "k_star": ks,
            "kstar_over_n": math.inf if is_inf(ks) else ks / n,
            "r_n_over_n": effective_rank_r(spec, n) / n,
        })
    return rows
