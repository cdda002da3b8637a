import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from copulacpts.dataset import SplitSpec, gen_oscillator
from copulacpts.errors import InvalidParam, ShapeMismatch
from copulacpts.evaluate import (
    area_ratios,
    ball_measure,
    calibration_sweep,
    coverage,
    horizon_sweep,
    read_metrics_csv,
    window_coverage,
    write_metrics_csv,
)
from copulacpts.forecaster import ForecasterSpec
from copulacpts.pipeline import ConfidenceRegion, calibrate_prepared, prepare

FS = ForecasterSpec()
ALPHAS = [0.5, 0.4, 0.3, 0.2, 0.1, 0.05]


def _regions(centers, radii):
    return [ConfidenceRegion(np.asarray(c, float), np.asarray(r, float)) for c, r in zip(centers, radii)]


# --- coverage ----------------------------------------------------------------


def test_coverage_examples():
    centers = np.zeros((3, 2, 1))
    truths = [np.array([[0.5], [0.5]]), np.array([[0.5], [2.0]]), np.array([[0.1], [0.1]])]
    joint, per_step = coverage(_regions(centers, np.full((3, 2), math.inf)), truths)
    assert joint == 1.0
    joint, per_step = coverage(_regions(centers, np.zeros((3, 2))), truths)
    assert joint == 0.0
    joint, per_step = coverage(_regions(centers, np.ones((3, 2))), truths)
    assert joint == pytest.approx(2 / 3)
    np.testing.assert_allclose(per_step, [1.0, 2 / 3])


def test_coverage_shape_checks():
    regions = _regions(np.zeros((2, 2, 1)), np.ones((2, 2)))
    with pytest.raises(ShapeMismatch):
        coverage(regions, [np.zeros((2, 1))])
    with pytest.raises(ShapeMismatch):
        coverage(regions, [np.zeros((2, 2))] * 2)
    with pytest.raises(ShapeMismatch):
        coverage([], [])


@given(n=st.integers(1, 100), k=st.integers(1, 4), d=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_coverage_matches_recount(n, k, d, seed):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n, k, d))
    radii = rng.choice([0.0, 0.5, 1.0, 2.0, math.inf], size=(n, k))
    truths = rng.normal(size=(n, k, d))
    joint, per_step = coverage(_regions(centers, radii), list(truths))
    ref_joint, ref_steps = oracles.coverage(centers.tolist(), radii.tolist(), truths.tolist())
    assert joint == ref_joint
    assert list(per_step) == ref_steps


def test_window_coverage():
    centers = np.zeros((2, 3, 1))
    truths = [np.array([[0.0], [5.0], [0.0]]), np.zeros((3, 1))]
    regions = _regions(centers, np.ones((2, 3)))
    np.testing.assert_array_equal(window_coverage(regions, truths, 2), [0.5, 0.5])
    np.testing.assert_array_equal(window_coverage(regions, truths, 1), [1.0, 0.5, 1.0])
    with pytest.raises(InvalidParam):
        window_coverage(regions, truths, 4)


# --- ball measure ------------------------------------------------------------


def test_ball_measure_examples():
    assert ball_measure(1.0, 2) == pytest.approx(math.pi, rel=1e-14)
    assert ball_measure(1.0, 3) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert ball_measure(2.0, 2) == pytest.approx(4 * math.pi, rel=1e-14)
    assert ball_measure(3.0, 1) == pytest.approx(6.0)
    assert ball_measure(math.inf, 2) == math.inf
    assert ball_measure(0.0, 5) == 0.0
    for bad in ((-1.0, 2), (1.0, 0), (math.nan, 2)):
        with pytest.raises(InvalidParam):
            ball_measure(*bad)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_ball_measure_matches_monte_carlo(d, r):
    estimate = oracles.ball_volume_mc(r, d, 400_000, np.random.default_rng(d * 10 + int(4 * r)))
    assert abs(estimate / ball_measure(r, d) - 1) <= 0.02


# --- sweeps ------------------------------------------------------------------


@pytest.fixture(scope="module")
def sweep_rows():
    ds = gen_oscillator(2000, 10, 10, 2, 0.05, 1.0, seed=0)
    return calibration_sweep(ds, SplitSpec(), FS, ["dichotomy", "sgd", "bonferroni", "l2concat"], ALPHAS, seeds=[0, 1])


def test_sweep_row_count_and_order(sweep_rows):
    assert len(sweep_rows) == 4 * len(ALPHAS) * 2
    keys = [(r.method, r.seed, r.alpha) for r in sweep_rows]
    assert len(set(keys)) == len(keys)
    assert all(r.n_test == 200 and r.k == 10 for r in sweep_rows)


def test_sweep_is_monotone_in_confidence(sweep_rows):
    for method in ("dichotomy", "sgd", "bonferroni", "l2concat"):
        for seed in (0, 1):
            rows = sorted((r for r in sweep_rows if r.method == method and r.seed == seed), key=lambda r: -r.alpha)
            assert np.all(np.diff([r.joint_coverage for r in rows]) >= 0), method
            assert np.all(np.diff([r.mean_measure for r in rows]) >= 0), method


def test_bonferroni_never_beats_dichotomy_on_shared_noise():
    # comonotone scores: one rank step on the Bonferroni grid is ample slack
    ds = gen_oscillator(2000, 10, 10, 2, 0.05, 1.0, seed=0)
    prep = prepare(ds, SplitSpec(seed=0), FS)
    for alpha in ALPHAS:
        dich = calibrate_prepared(prep, alpha, "dichotomy")
        bonf = calibrate_prepared(prep, alpha, "bonferroni")
        raised = []
        for F, s in zip(bonf.cdfs, bonf.thresholds.s_star):
            raised.append(F.score_at_rank(round(F(s) * F.n) + 1) if math.isfinite(s) else math.inf)
        assert sum(ball_measure(r, 2) for r in dich.thresholds.s_star) <= sum(ball_measure(r, 2) for r in raised)


def test_sweep_rejects_empty_lists():
    ds = gen_oscillator(100, 5, 2, seed=0)
    with pytest.raises(InvalidParam):
        calibration_sweep(ds, SplitSpec(), FS, ["dichotomy"], [])
    with pytest.raises(InvalidParam):
        calibration_sweep(ds, SplitSpec(), FS, [], [0.1])


def test_sweep_is_deterministic():
    ds = gen_oscillator(400, 6, 3, 2, 0.05, 0.5, seed=4)
    a = calibration_sweep(ds, SplitSpec(), FS, ["dichotomy", "sgd"], [0.2, 0.1], seeds=[3])
    b = calibration_sweep(ds, SplitSpec(), FS, ["dichotomy", "sgd"], [0.2, 0.1], seeds=[3])
    assert a == b


def test_metrics_csv_round_trip(tmp_path, sweep_rows):
    rows = sweep_rows[:6]
    rows[0].per_step_measure[0] = math.inf
    write_metrics_csv(rows, tmp_path / "m.csv")
    assert read_metrics_csv(tmp_path / "m.csv") == rows
    header = (tmp_path / "m.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["method", "alpha"] and "joint_coverage" in header and "mean_measure" in header


def _oscillator_horizon(rho):
    return lambda k, seed: gen_oscillator(2000, 10, k, 2, 0.05, rho, seed)


def test_horizon_sweep_savings_grow_with_horizon():
    rows = horizon_sweep(_oscillator_horizon(1.0), [1, 5, 20], SplitSpec(), FS, seeds=[0])
    ratios = area_ratios(rows)
    assert ratios[20] <= 0.7
    assert ratios[20] <= ratios[5]
    by = {(r.k, r.method): r for r in rows}
    assert by[(20, "bonferroni")].unbounded_fraction == 0.0


def test_single_step_horizon_gives_matching_areas():
    ds = gen_oscillator(2000, 10, 1, 2, 0.05, 1.0, 0)
    prep = prepare(ds, SplitSpec(seed=0), FS)
    dich = calibrate_prepared(prep, 0.1, "dichotomy")
    bonf = calibrate_prepared(prep, 0.1, "bonferroni")
    # both thresholds are order statistics of calibration scores near the 0.9 quantile
    order = np.sort(prep.scores_cal.s[:, 0])
    gap = np.searchsorted(order, dich.thresholds.s_star[0]) - np.searchsorted(order, bonf.thresholds.s_star[0])
    # dichotomy works on half the data, so one rank of its grid spans two of the full set
    assert abs(gap) <= 2 * math.sqrt(len(order))


def test_horizon_sweep_rejects_bad_horizons():
    with pytest.raises(InvalidParam):
        horizon_sweep(_oscillator_horizon(0.0), [], SplitSpec(), FS)
    with pytest.raises(InvalidParam):
        horizon_sweep(_oscillator_horizon(0.0), [5, 1], SplitSpec(), FS)
