"""Coverage and efficiency metrics, confidence-level and horizon sweeps."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from .conformal import step_errors
from .dataset import Dataset, SplitSpec, split
from .errors import InvalidParam, ShapeMismatch
from .forecaster import ForecasterSpec
from .pipeline import (
    CalibratedModel,
    ConfidenceRegion,
    ar_calibrate_reestimate,
    ar_fixed_radii,
    ar_regions,
    calibrate_prepared,
    predict_regions_batch,
    prepare,
)
from .search import SgdConfig


def ball_measure(r: float, d: int) -> float:
    """Volume of a d-ball of radius ``r``: ``pi^(d/2) / Gamma(d/2 + 1) * r^d``."""
    if d < 1:
        raise InvalidParam(f"d must be >= 1, got {d}")
    if math.isnan(r) or r < 0:
        raise InvalidParam(f"radius must be >= 0, got {r}")
    if math.isinf(r):
        return math.inf
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1)) * r**d


def _stack(regions: Sequence[ConfidenceRegion], truths: Sequence[np.ndarray]):
    if len(regions) != len(truths):
        raise ShapeMismatch(f"{len(regions)} regions for {len(truths)} targets")
    if not regions:
        raise ShapeMismatch("coverage of an empty test set")
    centers = np.stack([r.centers for r in regions])
    radii = np.stack([r.radii for r in regions])
    y = np.stack([np.asarray(t, dtype=float) for t in truths])
    if y.shape != centers.shape:
        raise ShapeMismatch(f"targets {y.shape} vs regions {centers.shape}")
    return centers, radii, y


def coverage(regions: Sequence[ConfidenceRegion], truths: Sequence[np.ndarray]) -> tuple[float, np.ndarray]:
    """Joint and per-step coverage with the strict boundary convention."""
    centers, radii, y = _stack(regions, truths)
    inside = step_errors(y, centers) < radii  # (n, k)
    per_step = inside.mean(axis=0)
    joint_radius = [r.joint_radius for r in regions]
    if any(jr is not None for jr in joint_radius):
        flat = np.linalg.norm((y - centers).reshape(len(regions), -1), axis=1)
        jr = np.array([math.inf if r is None else r for r in joint_radius])
        joint = float((flat < jr).mean())
    else:
        joint = float(inside.all(axis=1).mean())
    return joint, per_step


def window_coverage(regions: Sequence[ConfidenceRegion], truths: Sequence[np.ndarray], k: int) -> np.ndarray:
    """Joint coverage of every sliding window of ``k`` consecutive steps."""
    centers, radii, y = _stack(regions, truths)
    inside = step_errors(y, centers) < radii
    kp = inside.shape[1]
    if not 1 <= k <= kp:
        raise InvalidParam(f"window length must be in [1, {kp}], got {k}")
    return np.array([inside[:, w:w + k].all(axis=1).mean() for w in range(kp - k + 1)])


@dataclass
class EvalReport:
    method: str
    alpha: float
    seed: int
    k: int
    n_test: int
    joint_coverage: float
    mean_measure: float
    unbounded_fraction: float
    per_step_coverage: list[float] = field(default_factory=list)
    per_step_measure: list[float] = field(default_factory=list)


def evaluate(model: CalibratedModel, test: Dataset, seed: int = 0) -> EvalReport:
    regions = predict_regions_batch(model, test)
    joint, per_step = coverage(regions, list(test.y))
    d = test.meta.d
    step_measure = [ball_measure(r, d) for r in model.thresholds.s_star]
    # radii are shared by every test input, so the per-sample sum is the mean
    unbounded = float(np.isinf(model.thresholds.s_star).any())
    return EvalReport(
        method=model.method,
        alpha=model.alpha,
        seed=seed,
        k=model.k,
        n_test=len(test),
        joint_coverage=joint,
        mean_measure=float(sum(step_measure)),
        unbounded_fraction=unbounded,
        per_step_coverage=[float(c) for c in per_step],
        per_step_measure=step_measure,
    )


def calibration_sweep(
    ds: Dataset,
    spec: SplitSpec,
    fspec: ForecasterSpec,
    methods: Sequence[str],
    alphas: Sequence[float],
    seeds: Sequence[int] | None = None,
    sgd: SgdConfig | None = None,
) -> list[EvalReport]:
    """One report per (seed, method, alpha); each seed redraws the split."""
    if not alphas:
        raise InvalidParam("alphas must be non-empty")
    if not methods:
        raise InvalidParam("methods must be non-empty")
    seeds = [spec.seed] if seeds is None else list(seeds)
    rows = []
    for seed in seeds:
        prep = prepare(ds, _with_seed(spec, seed), fspec)
        for method in methods:
            for alpha in alphas:
                model = calibrate_prepared(prep, alpha, method, sgd)
                rows.append(evaluate(model, prep.test, seed))
    return sorted(rows, key=_row_key)


def horizon_sweep(
    make_dataset: Callable[[int, int], Dataset],
    ks: Sequence[int],
    spec: SplitSpec,
    fspec: ForecasterSpec,
    alpha: float = 0.1,
    methods: Sequence[str] = ("dichotomy", "bonferroni"),
    seeds: Sequence[int] = (0,),
    sgd: SgdConfig | None = None,
) -> list[EvalReport]:
    """Reports for each horizon ``k``; ``make_dataset(k, seed)`` builds the data."""
    if not ks:
        raise InvalidParam("ks must be non-empty")
    if list(ks) != sorted(set(ks)):
        raise InvalidParam(f"ks must be strictly increasing, got {list(ks)}")
    rows = []
    for k in ks:
        for seed in seeds:
            prep = prepare(make_dataset(k, seed), _with_seed(spec, seed), fspec)
            for method in methods:
                rows.append(evaluate(calibrate_prepared(prep, alpha, method, sgd), prep.test, seed))
    return sorted(rows, key=_row_key)


def area_ratios(rows: Iterable[EvalReport], numerator: str = "dichotomy", denominator: str = "bonferroni") -> dict[int, float]:
    """Mean-measure ratio ``numerator / denominator`` per horizon, averaged over seeds."""
    by_key: dict[tuple[int, str], list[float]] = {}
    for r in rows:
        by_key.setdefault((r.k, r.method), []).append(r.mean_measure)
    out = {}
    for k in sorted({k for k, _ in by_key}):
        num, den = by_key.get((k, numerator)), by_key.get((k, denominator))
        if num and den:
            out[k] = float(np.mean(num) / np.mean(den))
    return out


@dataclass
class ARComparison:
    k: int
    kp: int
    fixed_window_coverage: np.ndarray
    reestimate_window_coverage: np.ndarray
    fixed_joint_coverage: float
    reestimate_joint_coverage: float
    fixed_radii: np.ndarray
    reestimate_radii: np.ndarray


def ar_comparison(
    ds: Dataset,
    spec: SplitSpec,
    fspec: ForecasterSpec,
    k: int,
    alpha: float = 0.1,
    method: str = "dichotomy",
    sgd: SgdConfig | None = None,
) -> ARComparison:
    """Fixed-copula vs re-estimated autoregressive regions on a ``kp``-step dataset.

    The forecaster and first-window copula see only the first ``k`` target
    steps; re-estimation uses all ``kp = ds.meta.k`` calibration steps.
    """
    kp = ds.meta.k
    prep = prepare(ds.truncate_horizon(k), spec, fspec)
    model = calibrate_prepared(prep, alpha, method, sgd)
    # same permutation as prepare(), now keeping the full horizon
    _, cal1, cal2, test = split(ds, spec)
    fixed = ar_fixed_radii(model, kp)
    wm = ar_calibrate_reestimate(prep.forecaster, cal1, cal2, kp, alpha, method, sgd)
    truths = list(test.y)
    fixed_regions = ar_regions(prep.forecaster, fixed, test, alpha)
    re_regions = ar_regions(prep.forecaster, wm.radii, test, alpha)
    return ARComparison(
        k=k,
        kp=kp,
        fixed_window_coverage=window_coverage(fixed_regions, truths, k),
        reestimate_window_coverage=window_coverage(re_regions, truths, k),
        fixed_joint_coverage=coverage(fixed_regions, truths)[0],
        reestimate_joint_coverage=coverage(re_regions, truths)[0],
        fixed_radii=fixed,
        reestimate_radii=np.asarray(wm.radii),
    )


def _with_seed(spec: SplitSpec, seed: int) -> SplitSpec:
    return SplitSpec(spec.train_fraction, spec.cal_fraction, spec.test_fraction, spec.cal_split_fraction, seed)


def _row_key(r: EvalReport):
    return (r.k, r.method, r.seed, -r.alpha)


# ---------------------------------------------------------------------------
# CSV I/O

CSV_COLUMNS = [f.name for f in fields(EvalReport)]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_metrics_csv(rows: Iterable[EvalReport], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([
                r.method,
                _fmt(r.alpha),
                r.seed,
                r.k,
                r.n_test,
                _fmt(r.joint_coverage),
                _fmt(r.mean_measure),
                _fmt(r.unbounded_fraction),
                ";".join(_fmt(v) for v in r.per_step_coverage),
                ";".join(_fmt(v) for v in r.per_step_measure),
            ])


def read_metrics_csv(path: str | os.PathLike) -> list[EvalReport]:
    def floats(s: str) -> list[float]:
        return [float(v) for v in s.split(";")] if s else []

    with open(path, newline="") as fh:
        return [
            EvalReport(
                method=row["method"],
                alpha=float(row["alpha"]),
                seed=int(row["seed"]),
                k=int(row["k"]),
                n_test=int(row["n_test"]),
                joint_coverage=float(row["joint_coverage"]),
                mean_measure=float(row["mean_measure"]),
                unbounded_fraction=float(row["unbounded_fraction"]),
                per_step_coverage=floats(row["per_step_coverage"]),
                per_step_measure=floats(row["per_step_measure"]),
            )
            for row in csv.DictReader(fh)
        ]
