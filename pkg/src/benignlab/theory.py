"""Risk-bound ingredients, benign-family classification and trend scans."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, MonteCarloAborted, SizeCapExceeded
from .ranks import DEFAULT_B, effective_rank_r, is_inf, rank_profile
from .rates import log_n
from .risk import mc_risk
from .sampling import MAX_N, MAX_P, RegressionInstance, make_theta_star
from .spectrum import FamilySpec, Spectrum


@dataclass
class BoundReport:
    n: int
    b: float
    delta: float
    theta_norm: float
    sigma_y: float
    r0_over_n: float
    bias_envelope: float
    bias_bound: float
    kstar: object
    variance_term: float | None
    variance_bound: float | None
    lower_term: float | None
    applicable: bool
    reason: str = ""
    large_r0_indicator: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kstar"] = "inf" if is_inf(self.kstar) else self.kstar
        return d


def bound_terms(spec: Spectrum, n: int, b: float = DEFAULT_B, delta: float = 0.1,
                theta_norm: float = 1.0, sigma_y: float = 1.0) -> BoundReport:
    """Constant-free ingredients of the high-probability risk bounds.

    ``bias_envelope`` is max{sqrt(r0/n), r0/n, sqrt(log(1/delta)/n)} and
    ``bias_bound`` multiplies it by ||theta*||^2 ||Sigma||. The variance
    ingredient k*/n + n/R_{k*} is shared by the upper and lower bounds;
    ``variance_bound`` scales it by log(1/delta) sigma_y^2.
    ``large_r0_indicator`` is r0 / (n log(1 + r0)), the quantity whose size
    decides whether the bias lower bound kicks in.
    """
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if n < 2:
        raise ConfigError("n must be >= 2")
    conf = math.sqrt(math.log(1 / delta) / n)
    r0 = effective_rank_r(spec, 0)
    if math.isinf(r0):
        return BoundReport(n, b, delta, theta_norm, sigma_y, math.inf, math.inf, math.inf,
                           0, None, None, None, False, reason="divergent r_0")
    env = max(math.sqrt(r0 / n), r0 / n, conf)
    prof = rank_profile(spec, n, b)
    ks, vt = prof.k_star, prof.variance_term
    applicable = not is_inf(ks) and ks < n
    reason = "" if applicable else (
        f"k* is infinite ({prof.k_star_reason})" if is_inf(ks) else "k* >= n"
    )
    return BoundReport(
        n, b, delta, theta_norm, sigma_y, r0 / n, env,
        theta_norm**2 * spec.norm * env, ks, vt,
        None if vt is None else math.log(1 / delta) * sigma_y**2 * vt,
        vt, applicable, reason, r0 / (n * math.log1p(r0)),
    )


# ---------------------------------------------------------------------------
# classification


@dataclass
class BenignVerdict:
    verdict: str
    rule: str
    conditions: list[tuple[str, bool]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "rule": self.rule,
            "conditions": [{"name": k, "satisfied": v} for k, v in self.conditions],
        }


def _verdict(rule: str, conditions: list[tuple[str, bool]]) -> BenignVerdict:
    ok = all(v for _, v in conditions)
    return BenignVerdict("Benign" if ok else "NotBenign", rule, conditions)


def benign_classify(family: FamilySpec) -> BenignVerdict:
    """Decide benignness of a family from the symbolic form of its rate rules.

    Catalog:
      polylog    lambda_k = k^-a log^-b(k+1): benign iff a = 1 and b > 1
      exponent   lambda_k = k^-(1+a_n): benign iff a_n = o(1) and a_n = omega(1/n)
      truncpoly  lambda_k = k^-a, k <= p_n: benign iff
                 0 < a < 1, p_n = omega(n), p_n = o(n^(1/(1-a)));  or
                 a = 1, log p_n = omega(sqrt n), log p_n = o(n)
      expiso     lambda_k = exp(-(k-1)/tau) + eps_n, k <= p_n: benign iff
                 p_n = omega(n), eps_n p_n = o(n), log(n / (eps_n p_n)) = o(n)
    Anything else is OutOfCatalog.
    """
    p = family.param_dict
    ln = log_n()
    v = family.variant
    if v == "polylog":
        a = p["alpha"](1)
        b = p["beta"](1) if "beta" in p else 0.0
        return _verdict("polylog-decay", [("alpha == 1", a == 1.0), ("beta > 1", b > 1.0)])
    if v == "exponent":
        g = p["alpha"].log_growth()
        return _verdict("exponent-near-harmonic", [
            ("alpha_n = o(1)", g.to_minus_infinity()),
            ("alpha_n = omega(1/n)", (g + ln).to_plus_infinity()),
        ])
    if v == "truncpoly":
        a = p["alpha"](1)
        gp = p["p"].log_growth()
        if 0 < a < 1:
            return _verdict("truncated-poly-subharmonic", [
                ("0 < alpha < 1", True),
                ("p_n = omega(n)", (gp - ln).to_plus_infinity()),
                ("p_n = o(n^(1/(1-alpha)))", (gp - ln.scale(1 / (1 - a))).to_minus_infinity()),
            ])
        if a == 1:
            return _verdict("truncated-poly-harmonic", [
                ("alpha == 1", True),
                ("log p_n = omega(sqrt(n))", gp.is_omega_of_power(0.5)),
                ("log p_n = o(n)", gp.is_little_o_of_power(1.0)),
            ])
        return _verdict("truncated-poly-fast", [("alpha <= 1", False)])
    if v == "expiso":
        gp = p["p"].log_growth()
        mass = p["epsp"].log_growth() if "epsp" in p else p["eps"].log_growth() + gp
        return _verdict("exp-plus-isotropic", [
            ("p_n = omega(n)", (gp - ln).to_plus_infinity()),
            ("eps_n p_n = o(n)", (mass - ln).to_minus_infinity()),
            ("log(n / (eps_n p_n)) = o(n)", (ln - mass).is_little_o_of_power(1.0)),
        ])
    return BenignVerdict("OutOfCatalog", "none", [])


# ---------------------------------------------------------------------------
# scans


@dataclass
class ScanRow:
    n: int
    r0_over_n: float
    kstar_over_n: float
    n_over_Rkstar: float
    mc_median: float | None = None
    mc_iqr: float | None = None
    seeds: int = 0


@dataclass
class ScanResult:
    family: str
    b: float
    verdict: BenignVerdict
    rows: list[ScanRow]
    notes: list[str] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]


def analytic_row(spec: Spectrum, n: int, b: float = DEFAULT_B) -> ScanRow:
    r0 = effective_rank_r(spec, 0)
    if math.isinf(r0):
        return ScanRow(n, math.inf, math.inf, math.inf)
    prof = rank_profile(spec, n, b)
    if is_inf(prof.k_star):
        return ScanRow(n, r0 / n, math.inf, math.inf)
    return ScanRow(n, r0 / n, prof.k_star / n, n / float(prof.R[prof.k_star]))


def cell_seed(base_seed: int, n: int, s: int) -> int:
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(4, int(n), int(s)))
    return int(ss.generate_state(1, np.uint32)[0])


def benign_scan(family: FamilySpec, n_grid, b: float = DEFAULT_B, seeds: int = 20,
                replicas: int = 2, sigma: float = 1.0, theta_norm: float = 1.0,
                theta_mode: str = "first", z_dist: str = "gaussian", mc: bool = True,
                base_seed: int = 0, threads: int = 1,
                allow_degenerate: bool = False) -> ScanResult:
    """Analytic r0/n, k*/n, n/R_{k*} per n and, for finite-dimensional
    families within the size caps, the median and IQR over seeds of the
    FullResample Monte Carlo excess risk.
    """
    notes: list[str] = []
    rows = []
    cells = []
    for n in n_grid:
        spec = family.at(n)
        rows.append(analytic_row(spec, n, b))
        if not mc:
            continue
        if not family.finite_dimensional:
            notes.append(f"n={n}: infinite-dimensional family, Monte Carlo columns n/a")
            continue
        if spec.length > MAX_P or n > MAX_N:
            notes.append(f"n={n}: p={spec.length} exceeds size caps, Monte Carlo columns n/a")
            continue
        lam = spec.eigenvalues(1, spec.length)
        theta = make_theta_star(len(lam), theta_norm, theta_mode, seed=base_seed)
        for s in range(seeds):
            cells.append((len(rows) - 1, RegressionInstance(
                lam, n, theta, sigma, z_dist, cell_seed(base_seed, n, s))))

    def run(cell):
        _, inst = cell
        try:
            return mc_risk(inst, replicas, "full", allow_degenerate=allow_degenerate).mc_mean
        except (MonteCarloAborted, SizeCapExceeded):
            return math.nan

    if cells:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                values = list(pool.map(run, cells))
        else:
            values = [run(c) for c in cells]
        by_row: dict[int, list[float]] = {}
        for (i, _), v in zip(cells, values):
            by_row.setdefault(i, []).append(v)
        for i, vals in by_row.items():
            good = [v for v in vals if not math.isnan(v)]
            rows[i].seeds = len(good)
            if good:
                rows[i].mc_median = statistics.median(good)
                q = np.percentile(good, [25, 75])
                rows[i].mc_iqr = float(q[1] - q[0])
            if len(good) < len(vals):
                notes.append(f"n={rows[i].n}: {len(vals) - len(good)} seeds aborted")
    return ScanResult(str(family), b, benign_classify(family), rows, notes)
