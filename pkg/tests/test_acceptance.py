"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``RESULTS`` and repeated in the pytest
terminal summary (see conftest.py).
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from copulacpts.conformal import quantile
from copulacpts.copula import EmpiricalCopula, copula_eval
from copulacpts.dataset import SplitSpec, gen_oscillator, gen_toy_ar
from copulacpts.evaluate import ar_comparison, area_ratios, calibration_sweep, horizon_sweep
from copulacpts.forecaster import ForecasterSpec
from copulacpts.pipeline import prepare

FS = ForecasterSpec()
ALPHA = 0.1
RHOS = (0.0, 0.5, 1.0)
SEEDS = range(5)
RESULTS: list[str] = []


def record(name, ok, detail, started, budget):
    elapsed = time.perf_counter() - started
    ok = ok and elapsed < budget
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
    RESULTS.append(line)
    print(line)
    return ok


def _oscillator(rho, k=10, seed=0):
    return gen_oscillator(2000, 10, k, 2, 0.05, rho, seed)


def _mean(rows, method, field):
    return float(np.mean([getattr(r, field) for r in rows if r.method == method]))


@pytest.fixture(scope="module")
def grid():
    """Criterion-2 grid: oscillator rho in {0, .5, 1}, alpha .1, five split seeds."""
    started = time.perf_counter()
    rows = {
        rho: calibration_sweep(_oscillator(rho), SplitSpec(), FS, ["dichotomy", "sgd", "bonferroni"], [ALPHA], SEEDS)
        for rho in RHOS
    }
    return rows, time.perf_counter() - started


def test_criterion_1_icp_rank_law():
    started = time.perf_counter()
    bad = []
    for n in range(1, 13):
        for alpha in (0.05, 0.1, 0.2, 0.25, 0.3, 0.5, 0.75):
            expected = Fraction(math.ceil((n + 1) * (1 - Fraction(str(alpha)))), n + 1)
            values = np.arange(1.0, n + 2)
            covered = sum(
                values[r] <= quantile(1 - alpha, np.delete(values, r), augment_inf=True) for r in range(n + 1)
            )
            if Fraction(int(covered), n + 1) != expected or oracles.icp_cover_probability(n, alpha) != expected:
                bad.append((n, alpha))
    assert record("criterion 1 ICP rank law", not bad, f"{12 * 7} (n, alpha) cells, mismatches {bad}", started, 1)


def test_criterion_2_joint_validity(grid):
    rows, elapsed = grid
    started = time.perf_counter() - elapsed
    cells, ok = [], True
    for rho in RHOS:
        for method in ("dichotomy", "sgd"):
            cov = _mean(rows[rho], method, "joint_coverage")
            ok &= 0.89 <= cov <= 0.96
            cells.append(f"rho={rho} {method} {cov:.3f}")
    assert record("criterion 2 joint coverage in [0.89, 0.96]", ok, "; ".join(cells), started, 120)


@pytest.mark.parametrize("rho", RHOS)
def test_criterion_3_efficiency_vs_bonferroni(grid, rho):
    rows, _ = grid
    started = time.perf_counter()
    ratio = _mean(rows[rho], "dichotomy", "mean_measure") / _mean(rows[rho], "bonferroni", "mean_measure")
    assert record(
        f"criterion 3 dichotomy/bonferroni measure at rho={rho}", ratio <= 1.02, f"ratio {ratio:.4f} (limit 1.02)", started, 180
    )


def test_criterion_3_long_horizon_savings():
    started = time.perf_counter()
    rows = horizon_sweep(lambda k, s: _oscillator(1.0, k, s), [20], SplitSpec(), FS, ALPHA, seeds=SEEDS)
    ratio = area_ratios(rows)[20]
    assert record("criterion 3 rho=1 k=20 measure ratio", ratio <= 0.7, f"ratio {ratio:.4f} (limit 0.7)", started, 180)


def test_criterion_4_search_methods_agree(grid):
    rows, _ = grid
    started = time.perf_counter()
    cells, ok = [], True
    for rho in RHOS:
        dc, sc = _mean(rows[rho], "dichotomy", "joint_coverage"), _mean(rows[rho], "sgd", "joint_coverage")
        dm, sm = _mean(rows[rho], "dichotomy", "mean_measure"), _mean(rows[rho], "sgd", "mean_measure")
        gap, rel = abs(dc - sc), abs(sm / dm - 1)
        ok &= gap <= 0.02 and rel <= 0.15
        cells.append(f"rho={rho} coverage gap {gap:.3f}, measure gap {rel:.1%}")
    assert record("criterion 4 sgd vs dichotomy", ok, "; ".join(cells), started, 120)


def test_criterion_5_copula_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(5)
    mismatches = 0
    for _ in range(1000):
        m, k, n1 = rng.integers(1, 21), rng.integers(1, 5), rng.integers(1, 9)
        pts = rng.integers(0, n1 + 1, size=(m, k)) / n1
        u = rng.integers(0, n1 + 1, size=k) / n1
        C = EmpiricalCopula(pts)
        mismatches += Fraction(C.count_dominated(u), m + 1) != oracles.copula(pts.tolist(), u.tolist())
    violations = 0
    for _ in range(10_000 // 2):
        m, k = rng.integers(1, 21), rng.integers(1, 5)
        C = EmpiricalCopula(rng.uniform(size=(m, k)))
        u = rng.uniform(size=k)
        v = np.minimum(u + rng.uniform(0, 0.5, size=k), 1.0)
        a, b = copula_eval(C, u), copula_eval(C, v)
        violations += not (0 <= a <= b <= m / (m + 1))
    ok = mismatches == 0 and violations == 0
    assert record(
        "criterion 5 copula oracle", ok, f"1000 oracle trials, {mismatches} mismatches; 10^4 evaluations, {violations} violations", started, 60
    )


def test_criterion_6_independence():
    started = time.perf_counter()
    prep = prepare(gen_oscillator(8890, 10, 2, 2, 0.05, 0.0, seed=6), SplitSpec(seed=6), FS)
    C = prep.copula
    levels = np.linspace(0.1, 1.0, 10)
    grid_pts = np.array([[a, b] for a in levels for b in levels])
    gap = max(abs(copula_eval(C, u) - u[0] * u[1]) for u in grid_pts)
    tol = 3 / math.sqrt(C.m)
    assert record(
        "criterion 6 independence vs product copula", C.m == 2000 and gap <= tol, f"m={C.m}, max gap {gap:.4f} (limit {tol:.4f})", started, 60
    )


def test_criterion_7_autoregressive_contrast():
    started = time.perf_counter()
    cells, ok = [], True
    for seed in range(3):
        ds = gen_toy_ar(20000, "switching", seed=seed, steps=3)
        cmp = ar_comparison(ds, SplitSpec(seed=seed), FS, k=2, alpha=ALPHA)
        fixed, re = cmp.fixed_window_coverage.min(), cmp.reestimate_window_coverage.min()
        ok &= fixed <= 1 - ALPHA - 0.02 and re >= 1 - ALPHA - 0.02
        cells.append(f"seed {seed}: fixed {fixed:.3f}, re-estimated {re:.3f}")
    assert record("criterion 7 worst-window coverage, switching series", ok, "; ".join(cells), started, 120)


def test_criterion_8_sweep_monotonicity():
    started = time.perf_counter()
    methods = ["dichotomy", "sgd", "bonferroni", "l2concat"]
    alphas = [0.5, 0.4, 0.3, 0.2, 0.1, 0.05]
    violations = 0
    total = 0
    for rho in RHOS:
        rows = calibration_sweep(_oscillator(rho), SplitSpec(), FS, methods, alphas, SEEDS)
        for method in methods:
            for seed in SEEDS:
                cell = sorted((r for r in rows if r.method == method and r.seed == seed), key=lambda r: -r.alpha)
                cov = np.diff([r.joint_coverage for r in cell])
                meas = np.diff([r.mean_measure for r in cell])
                violations += bool(np.any(cov < 0) or np.any(meas < 0))
                total += 1
    assert record("criterion 8 sweep monotone in confidence", violations == 0, f"{violations}/{total} method-seed curves non-monotone", started, 300)
