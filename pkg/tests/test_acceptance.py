"""Acceptance gate: twelve criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line (collected into the pytest terminal
summary). Run standalone with ``python3 tests/test_acceptance.py``.

Criteria 4-10 are written as functions of a thread count; criterion 12
re-runs them with a different count and compares the rendered CSV bodies.
"""

from __future__ import annotations

import functools
import io
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from benignlab.cli import main as cli_main
from benignlab.ranks import (
    effective_rank_R, effective_rank_r, phi_monotone_check, rank_identities_table,
    rank_profile, variance_term_minimizer,
)
from benignlab.report import csv_body, csv_text
from benignlab.risk import exact_risk, mc_risk, smw_terms, variance_trace_direct, variance_trace_z
from benignlab.sampling import Z_DISTS, RegressionInstance, make_theta_star, sample_design
from benignlab.spectrum import (
    Constant, ExpPlusIso, FamilySpec, Geometric, TruncatedPoly, make_explicit, spectrum_from_ranks,
)
from benignlab.theory import benign_classify, benign_scan

RESULTS: dict[int, str] = {}


def report(num: int, passed: bool, detail: str, started: float, elapsed: float | None = None) -> None:
    if elapsed is None:
        elapsed = time.perf_counter() - started
    line = f"criterion {num:2d}: {'PASS' if passed else 'FAIL'} ({elapsed:.1f}s) {detail}"
    RESULTS[num] = line
    print(line)


def pmap(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _decreasing(col) -> bool:
    return all(a > b for a, b in zip(col, col[1:]))


# ---------------------------------------------------------------------------
# 1-3: analytic


def test_criterion_01_rank_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    bad, checked = 0, 0
    for _ in range(200):
        p = int(rng.integers(1, 501))
        kind = rng.integers(3)
        if kind == 0:
            vals = rng.uniform(0, 1, p)
        elif kind == 1:
            vals = rng.pareto(1.5, p)
        else:
            vals = np.exp(-rng.uniform(0, 20, p))
        vals[rng.random(p) < 0.1] = 0.0
        if not vals.any():
            vals[0] = 1.0
        spec = make_explicit(vals)
        t = rank_identities_table(spec, spec.rank - 1, tol=1e-8)
        assert len(t["r"]) == spec.rank, "every k with lambda_{k+1} > 0 is covered"
        ok = t["r_ge_1"] & t["r_sq_le_r"] & t["r_le_R"] & t["R_le_r2"] & t["product"]
        bad += int(np.count_nonzero(~ok))
        checked += len(ok)
    passed = bad == 0 and time.perf_counter() - t0 < 5
    report(1, passed, f"{checked} (spectrum, k) pairs, {bad} violations", t0)
    assert passed


def test_criterion_02_closed_form_anchors():
    t0 = time.perf_counter()
    exact = all(effective_rank_r(Constant(p), 0) == p and effective_rank_R(Constant(p), 0) == p
                for p in (1, 2, 10, 1000, 12345))
    g = Geometric(0.5)
    err = max(max(abs(effective_rank_r(g, k) - 2) / 2, abs(effective_rank_R(g, k) - 3) / 3)
              for k in range(51))
    passed = exact and err <= 1e-10 and time.perf_counter() - t0 < 1
    report(2, passed, f"Constant exact={exact}, Geometric max rel err {err:.2e}", t0)
    assert passed


def test_criterion_03_ranks_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 201))
        # (1, 100]: reflect uniform draws on [0, 99) away from the open endpoint
        u = 100.0 - rng.uniform(0, 99, m)
        spec = spectrum_from_ranks(u, m)
        for k in range(m):
            worst = max(worst, abs(effective_rank_r(spec, k) - u[k]) / u[k])
    lam = spectrum_from_ranks(np.full(60, 2.0)).values
    geo_err = float(np.max(np.abs(lam / 2.0 ** -np.arange(1, 61) - 1)))
    passed = worst <= 1e-8 and geo_err <= 1e-12 and time.perf_counter() - t0 < 5
    report(3, passed, f"max rel err {worst:.2e}; u=2 vs 2^-k rel err {geo_err:.2e}", t0)
    assert passed


# ---------------------------------------------------------------------------
# 4-10: sampled; each returns (passed, detail, csv)


def run_criterion_04(threads: int):
    rng = np.random.default_rng(4)
    cases = []
    for i in range(50):
        n = int(rng.integers(8, 129))
        p = int(rng.integers(max(2 * n, 64), 1025))
        lam = np.sort(np.exp(rng.uniform(-4, 1, p)))[::-1]
        idx = rng.choice(p, 10, replace=False)
        cases.append((i, RegressionInstance(lam, n, np.zeros(p), z_dist=Z_DISTS[i % 3], seed=i), idx))

    def cell(case):
        i, inst, idx = case
        X = sample_design(inst).X
        a = variance_trace_direct(X, inst.lam)
        b = variance_trace_z(X, inst.lam)
        terms = smw_terms(X, inst.lam, idx)
        smw = max(t.rel_error for t in terms if not t.skipped)
        return i, inst.n, inst.p, inst.z_dist, a, abs(a - b) / a, smw

    rows = pmap(cell, cases, threads)
    trace_err = max(r[5] for r in rows)
    smw_err = max(r[6] for r in rows)
    passed = trace_err <= 1e-8 and smw_err <= 1e-10
    csv = csv_text(["case", "n", "p", "z_dist", "trace_c", "path_rel_err", "smw_rel_err"], rows)
    return passed, f"trace path rel err {trace_err:.1e}, SMW rel err {smw_err:.1e}", csv


def run_criterion_05(threads: int):
    spec = ExpPlusIso(1.0, 1e-3, 1000)
    theta = make_theta_star(1000, 1.0, "first")
    rows = []
    for seed in range(10):
        inst = RegressionInstance.from_spectrum(spec, 100, theta, sigma=1.0, seed=seed)
        r = mc_risk(inst, 2000, "fixed", threads=threads)
        z = abs(r.mc_mean - (r.bias_term + r.trace_c)) / r.mc_stderr
        rows.append((seed, r.bias_term, r.trace_c, r.mc_mean, r.mc_stderr, z))
    good = sum(row[5] <= 3 for row in rows)
    csv = csv_text(["seed", "bias_term", "trace_c", "mc_mean", "mc_stderr", "z"], rows)
    return good >= 9, f"{good}/10 seeds within 3 standard errors", csv


def _sandwich_grid():
    for n in (64, 128, 256):
        yield n, Constant(10 * n)
        yield n, ExpPlusIso(1.0, 0.01, 16 * n)
        yield n, TruncatedPoly(0.25, 16 * n)


def _acceptance_grid():
    """Every analytic instance used by the acceptance criteria."""
    grid = list(_sandwich_grid())
    grid += [(n, Constant(10_000)) for n in (10, 50)]
    grid += [(100, Constant(200))]
    fam = FamilySpec.make("expiso", tau=1, p="ceil(n^1.5)", epsp="n^0.5")
    grid += [(n, fam.at(n)) for n in (64, 128, 256)]
    grid += [(50, ExpPlusIso(1.0, 0.01, 2000)), (100, ExpPlusIso(1.0, 1e-3, 1000))]
    return grid


def run_criterion_06(threads: int):
    def cell(item):
        n, spec = item
        prof = rank_profile(spec, n)
        if not isinstance(prof.k_star, int):
            return n, str(spec.to_dict()["params"]), spec.variant, None, None, None, True
        res = variance_term_minimizer(spec, n)
        return n, str(spec.to_dict()["params"]), spec.variant, res.k_star, res.l_min, res.value, res.holds

    rows = pmap(cell, _acceptance_grid(), threads)
    finite = [r for r in rows if r[3] is not None]
    passed = all(r[6] for r in finite) and len(finite) >= 10
    csv = csv_text(["n", "params", "variant", "k_star", "l_min", "value", "holds"], rows)
    return passed, f"{len(finite)} finite-k* instances, minimizer = k* in all: {passed}", csv


def run_criterion_07(threads: int):
    reps = pmap(lambda n: phi_monotone_check(Constant(10_000), n, 5.0), (10, 50), threads)
    rows = [(r.n, r.checked, len(r.violations)) for r in reps]
    passed = all(r[2] == 0 for r in rows) and all(r[1] > 0 for r in rows)
    csv = csv_text(["n", "checked", "violations"], rows)
    return passed, "violations " + ", ".join(f"n={r[0]}: {r[2]}/{r[1]}" for r in rows), csv


def run_criterion_08(threads: int):
    cells = []
    for n, spec in _sandwich_grid():
        prof = rank_profile(spec, n)
        assert prof.k_star <= n / 10, (n, spec)
        for seed in range(10):
            cells.append((n, spec, prof.k_star, prof.variance_term, seed))

    def cell(c):
        n, spec, ks, vt, seed = c
        inst = RegressionInstance.from_spectrum(spec, n, np.zeros(spec.length), seed=seed)
        tc = exact_risk(inst, with_alt=False).trace_c
        return n, spec.variant, seed, ks, vt, tc, tc / vt

    rows = pmap(cell, cells, threads)
    inside = sum(1e-2 <= r[6] <= 1e2 for r in rows)
    ratios = [r[6] for r in rows]
    passed = inside >= 0.95 * len(rows)
    csv = csv_text(["n", "variant", "seed", "k_star", "variance_term", "trace_c", "ratio"], rows)
    return passed, (f"{inside}/{len(rows)} cells in [1e-2, 1e2], ratio range "
                    f"[{min(ratios):.3f}, {max(ratios):.3f}]"), csv


def run_criterion_09(threads: int):
    n = 100

    def cell(seed):
        inst = RegressionInstance(np.ones(2 * n), n, np.zeros(2 * n), seed=seed)
        return seed, exact_risk(inst, with_alt=False).trace_c

    rows = pmap(cell, range(20), threads)
    low = min(r[1] for r in rows)
    csv = csv_text(["seed", "trace_c"], rows)
    return low >= 0.05, f"min trace_c over 20 seeds {low:.4f} (floor 0.05)", csv


def run_criterion_10(threads: int):
    fam = FamilySpec.make("expiso", tau=1, p="ceil(n^1.5)", epsp="n^0.5")
    res = benign_scan(fam, [64, 128, 256], seeds=20, replicas=2, sigma=1.0, theta_norm=1.0,
                      threads=threads)
    cols = {c: res.column(c) for c in ("r0_over_n", "kstar_over_n", "n_over_Rkstar", "mc_median")}
    passed = all(_decreasing(v) for v in cols.values())
    csv = csv_text(["n", "r0_over_n", "kstar_over_n", "n_over_Rkstar", "mc_median", "mc_iqr", "seeds"],
                   ([getattr(r, c) for c in ("n", "r0_over_n", "kstar_over_n", "n_over_Rkstar",
                                             "mc_median", "mc_iqr", "seeds")] for r in res.rows))
    med = ", ".join(f"{v:.4f}" for v in cols["mc_median"])
    return passed, f"all columns strictly decreasing: {passed}; MC medians {med}", csv


LIMITS = {4: 60, 5: 120, 6: 10, 7: 5, 8: 300, 9: 30, 10: 600}
RUNNERS = {4: run_criterion_04, 5: run_criterion_05, 6: run_criterion_06, 7: run_criterion_07,
           8: run_criterion_08, 9: run_criterion_09, 10: run_criterion_10}


@functools.lru_cache(maxsize=None)
def single_thread_run(num: int):
    t0 = time.perf_counter()
    passed, detail, csv = RUNNERS[num](1)
    return passed, detail, csv, time.perf_counter() - t0


@pytest.mark.parametrize("num", sorted(RUNNERS))
def test_sampled_criteria(num):
    t0 = time.perf_counter()
    passed, detail, _, elapsed = single_thread_run(num)
    ok = passed and elapsed < LIMITS[num]
    report(num, ok, detail + ("" if elapsed < LIMITS[num] else f"; over {LIMITS[num]}s"), t0, elapsed)
    assert ok


# ---------------------------------------------------------------------------
# 11-12


CATALOG = [
    ("polylog", dict(alpha=1, beta=2), "Benign"),
    ("polylog", dict(alpha=1, beta=1), "NotBenign"),
    ("polylog", dict(alpha=2, beta=0), "NotBenign"),
    ("exponent", dict(alpha="n^-0.5"), "Benign"),
    ("exponent", dict(alpha=0.5), "NotBenign"),
    ("truncpoly", dict(alpha=0.5, p="n^1.5"), "Benign"),
    ("truncpoly", dict(alpha=2, p="n^2"), "NotBenign"),
    ("expiso", dict(tau=1, p="n^2", eps="n^-1.5"), "Benign"),
]


def test_criterion_11_classifier():
    t0 = time.perf_counter()
    got = [benign_classify(FamilySpec.make(v, **kw)).verdict for v, kw, _ in CATALOG]
    hits = sum(g == want for g, (_, _, want) in zip(got, CATALOG))
    passed = hits == len(CATALOG) and time.perf_counter() - t0 < 1
    report(11, passed, f"{hits}/{len(CATALOG)} cataloged verdicts match", t0)
    assert passed


def _cli_csv(argv: list[str]) -> str:
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli_main(argv)
    assert code == 0, err.getvalue()
    return out.getvalue()


def test_criterion_12_determinism(tmp_path):
    t0 = time.perf_counter()
    mismatched = []
    for num in sorted(RUNNERS):
        _, _, csv_1, _ = single_thread_run(num)
        _, _, csv_4 = RUNNERS[num](4)
        if csv_body(csv_1) != csv_body(csv_4):
            mismatched.append(num)
    scan = ["benign-scan", "--family", "expiso:tau=1,p=ceil(n^1.5),epsp=n^0.5",
            "--n-grid", "64,128", "--seeds", "6"]
    if csv_body(_cli_csv(scan + ["--threads", "1"])) != csv_body(_cli_csv(scan + ["--threads", "3"])):
        mismatched.append("cli benign-scan")
    risk = ["risk-mc", "--family", "expiso:tau=1,eps=1e-3,p=1000", "--n", "100", "--replicas", "500"]
    rows = []
    for threads in ("1", "3"):
        path = tmp_path / f"risk{threads}.csv"
        _cli_csv(risk + ["--threads", threads, "--csv", str(path)])
        rows.append(path.read_text())
    if rows[0] != rows[1]:
        mismatched.append("cli risk-mc")
    passed = not mismatched
    report(12, passed, "CSV bodies identical for threads 1 vs 4 (criteria 4-10) and 1 vs 3 (CLI)"
           if passed else f"mismatch in {mismatched}", t0)
    assert passed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
