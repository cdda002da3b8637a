"""Calibrate-then-predict workflow and its autoregressive extensions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence

import numpy as np

from .conformal import (
    EmpiricalCdf,
    ScoreMatrix,
    bonferroni_calibrate,
    concat_nonconformity,
    fit_cdfs,
    l2_concat_calibrate,
    nonconformity,
    rank_for,
    step_errors,
)
from .copula import EmpiricalCopula, compute_u
from .dataset import Dataset, SplitSpec, concat, split
from .errors import EmptySubset, InsufficientCalibration, InvalidLevel, InvalidParam, ShapeMismatch
from .forecaster import FittedForecaster, ForecasterSpec, fit
from .search import (
    COPULA_METHODS,
    METHODS,
    SgdConfig,
    ThresholdVector,
    dichotomy_search,
    sgd_search,
    threshold_levels,
)


@dataclass(frozen=True, eq=False)
class ConfidenceRegion:
    """One d-ball per horizon step: ``{y : ||y - centers[j]|| < radii[j]}``.

    ``joint_radius`` is set only for the full-horizon L2 baseline, whose true
    region is a single ball over the flattened horizon; ``radii`` then hold the
    per-step rendering of that ball.
    """

    centers: np.ndarray  # (k, d)
    radii: np.ndarray  # (k,)
    joint_radius: float | None = None
    series_id: Hashable = None
    alpha: float | None = None

    @property
    def unbounded(self) -> np.ndarray:
        return np.isinf(self.radii)

    def step_contains(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != self.centers.shape:
            raise ShapeMismatch(f"target {y.shape} vs region {self.centers.shape}")
        return step_errors(y, self.centers) < self.radii

    def contains(self, y: np.ndarray) -> bool:
        if self.joint_radius is not None:
            y = np.asarray(y, dtype=float)
            if y.shape != self.centers.shape:
                raise ShapeMismatch(f"target {y.shape} vs region {self.centers.shape}")
            return bool(np.linalg.norm((y - self.centers).ravel()) < self.joint_radius)
        return bool(self.step_contains(y).all())

    def to_json(self) -> dict:
        out = {
            "series_id": self.series_id,
            "alpha": self.alpha,
            "steps": [
                {"center": [float(c) for c in center], "radius": None if math.isinf(r) else float(r)}
                for center, r in zip(self.centers, self.radii)
            ],
        }
        if self.joint_radius is not None:
            out["joint_radius"] = None if math.isinf(self.joint_radius) else float(self.joint_radius)
        return out


@dataclass(frozen=True, eq=False)
class CalibratedModel:
    thresholds: ThresholdVector
    cdfs: list[EmpiricalCdf]
    copula: EmpiricalCopula | None
    alpha: float
    forecaster: FittedForecaster
    meta: dict[str, Any] = field(default_factory=dict)
    joint_radius: float | None = None

    @property
    def k(self) -> int:
        return self.thresholds.k

    @property
    def method(self) -> str:
        return self.thresholds.method

    def to_json(self) -> dict:
        out = {"alpha": self.alpha, **self.thresholds.to_json(), "meta": self.meta}
        if self.joint_radius is not None:
            out["joint_radius"] = None if math.isinf(self.joint_radius) else self.joint_radius
        return out


@dataclass(frozen=True, eq=False)
class Prepared:
    """Everything ``calibrate`` computes before the threshold search.

    Sweeps reuse one ``Prepared`` across methods and confidence levels.
    """

    forecaster: FittedForecaster
    train: Dataset
    cal1: Dataset
    cal2: Dataset
    test: Dataset
    scores1: ScoreMatrix
    scores2: ScoreMatrix
    cdfs: list[EmpiricalCdf]
    copula: EmpiricalCopula
    meta: dict[str, Any]

    @property
    def scores_cal(self) -> ScoreMatrix:
        return ScoreMatrix(np.vstack([self.scores1.s, self.scores2.s]), "cal")


def prepare(ds: Dataset, spec: SplitSpec, fspec: ForecasterSpec) -> Prepared:
    """Split, train, score both calibration halves and build the empirical copula."""
    try:
        train, cal1, cal2, test = split(ds, spec)
    except EmptySubset as exc:
        raise InsufficientCalibration(str(exc)) from None
    f = fit(fspec, train)
    scores1 = nonconformity(f, cal1, "cal1")
    scores2 = nonconformity(f, cal2, "cal2")
    cdfs = fit_cdfs(scores1)
    copula = EmpiricalCopula(compute_u(cdfs, scores2))
    meta = {
        "split_sizes": {"train": len(train), "cal1": len(cal1), "cal2": len(cal2), "test": len(test)},
        "seed": spec.seed,
        "forecaster": fspec.to_json(),
    }
    return Prepared(f, train, cal1, cal2, test, scores1, scores2, cdfs, copula, meta)


def calibrate_prepared(
    prep: Prepared,
    alpha: float,
    method: str = "dichotomy",
    sgd: SgdConfig | None = None,
) -> CalibratedModel:
    if not 0.0 < alpha < 1.0:
        raise InvalidLevel(f"alpha must be in (0, 1), got {alpha}")
    if method not in METHODS:
        raise InvalidParam(f"method must be one of {METHODS}, got {method!r}")
    meta = {**prep.meta, "method": method}
    if method == "dichotomy":
        tv = dichotomy_search(prep.copula, prep.cdfs, alpha)
        return CalibratedModel(tv, prep.cdfs, prep.copula, alpha, prep.forecaster, meta)
    if method == "sgd":
        sgd = sgd or SgdConfig()
        meta["sgd"] = sgd.to_json()
        tv = sgd_search(prep.copula, prep.cdfs, alpha, sgd, dim=prep.forecaster.d)
        return CalibratedModel(tv, prep.cdfs, prep.copula, alpha, prep.forecaster, meta)
    # the baselines calibrate on the whole calibration set
    scores = prep.scores_cal
    cdfs = fit_cdfs(scores)
    if method == "bonferroni":
        return CalibratedModel(bonferroni_calibrate(scores, alpha), cdfs, None, alpha, prep.forecaster, meta)
    cal = concat([prep.cal1, prep.cal2])
    radius = l2_concat_calibrate(concat_nonconformity(prep.forecaster, cal), alpha)
    tv = ThresholdVector.from_thresholds(np.full(scores.k, radius), cdfs, "l2concat")
    return CalibratedModel(tv, cdfs, None, alpha, prep.forecaster, meta, joint_radius=radius)


def calibrate(
    ds: Dataset,
    spec: SplitSpec,
    fspec: ForecasterSpec,
    alpha: float,
    method: str = "dichotomy",
    sgd: SgdConfig | None = None,
) -> CalibratedModel:
    """Train a forecaster and calibrate per-step radii for joint coverage ``1 - alpha``."""
    return calibrate_prepared(prepare(ds, spec, fspec), alpha, method, sgd)


def _region(model_alpha: float, centers: np.ndarray, radii: np.ndarray, joint_radius=None, sid=None):
    radii = np.asarray(radii, dtype=float)
    return ConfidenceRegion(centers, radii, joint_radius, sid, model_alpha)


def predict_regions(m: CalibratedModel, x: np.ndarray, series_id: Hashable = None) -> ConfidenceRegion:
    return _region(m.alpha, m.forecaster.predict(x), m.thresholds.s_star, m.joint_radius, series_id)


def predict_regions_batch(m: CalibratedModel, ds: Dataset) -> list[ConfidenceRegion]:
    centers = m.forecaster.predict_batch(ds.x)
    return [_region(m.alpha, c, m.thresholds.s_star, m.joint_radius, sid) for c, sid in zip(centers, ds.series_id)]


# ---------------------------------------------------------------------------
# Autoregressive prediction


def _smallest_feasible_index(C: EmpiricalCopula, prefix: Sequence[float], levels: np.ndarray, required: int) -> int | None:
    """Smallest ``i`` with ``count(prefix + [levels[i]]) >= required`` (levels ascending)."""

    def ok(i: int) -> bool:
        u = np.append(np.asarray(prefix, dtype=float), levels[i])
        return bool(np.all(np.isinf(u))) or C.count_dominated(u) >= required

    lo, hi = -1, len(levels) - 1
    if not ok(hi):
        return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def ar_fixed_radii(m: CalibratedModel, kp: int) -> np.ndarray:
    """Radii for ``kp`` steps reusing the calibrated copula on every sliding window.

    Each new step gets the smallest level ``u`` such that
    ``C(u*_2, ..., u*_k, u) >= 1 - alpha``, with the earlier levels fixed, and
    the radius is read off the last step's CDF. Valid when the dependence
    between steps does not change along the series.
    """
    if m.copula is None:
        raise InvalidParam(f"autoregressive copula extension needs a copula method, got {m.method!r}")
    if kp < m.k:
        raise InvalidParam(f"kp must be >= k={m.k}, got {kp}")
    C, F_last = m.copula, m.cdfs[-1]
    required = rank_for(1.0 - m.alpha, C.m + 1)
    ranks = np.arange(F_last.n + 2)
    thresholds = F_last.score_at_rank(ranks)
    levels = np.array([math.inf if math.isinf(s) else float(F_last(s)) for s in thresholds])
    window = list(threshold_levels(m.cdfs, m.thresholds.s_star))
    radii = list(m.thresholds.s_star)
    for _ in range(kp - m.k):
        window = window[1:]
        i = _smallest_feasible_index(C, window, levels, required)
        i = len(levels) - 1 if i is None else i
        window.append(levels[i])
        radii.append(thresholds[i])
    return np.array(radii, dtype=float)


def ar_predict_fixed(m: CalibratedModel, x: np.ndarray, kp: int, series_id: Hashable = None) -> ConfidenceRegion:
    centers = m.forecaster.roll(np.asarray(x, dtype=float)[None], kp)[0]
    return _region(m.alpha, centers, ar_fixed_radii(m, kp), sid=series_id)


@dataclass(frozen=True, eq=False)
class WindowedModel:
    """One independently calibrated threshold vector per sliding window of ``k`` steps.

    ``radii[j]`` is the largest threshold any window assigns to step ``j``,
    so every window's own coverage event is contained in the emitted region.
    """

    forecaster: FittedForecaster
    alpha: float
    kp: int
    windows: list[ThresholdVector]
    radii: np.ndarray

    @property
    def k(self) -> int:
        return self.forecaster.k


def ar_calibrate_reestimate(
    forecaster: FittedForecaster,
    cal1: Dataset,
    cal2: Dataset,
    kp: int,
    alpha: float,
    method: str = "dichotomy",
    sgd: SgdConfig | None = None,
) -> WindowedModel:
    """Fit a fresh CDF set and copula for each window ``w..w+k-1`` of a ``kp``-step horizon.

    ``cal1`` and ``cal2`` must carry at least ``kp`` target steps; their
    scores come from rolling ``forecaster`` autoregressively.
    """
    k = forecaster.k
    if kp < k:
        raise InvalidParam(f"kp must be >= k={k}, got {kp}")
    if method not in COPULA_METHODS + ("bonferroni",):
        raise InvalidParam(f"re-estimation supports dichotomy, sgd or bonferroni, got {method!r}")
    for part in (cal1, cal2):
        if part.meta.k < kp:
            raise InsufficientCalibration(f"calibration targets cover {part.meta.k} steps, need {kp}")
    s1 = step_errors(cal1.y[:, :kp], forecaster.roll(cal1.x, kp))
    s2 = step_errors(cal2.y[:, :kp], forecaster.roll(cal2.x, kp))
    windows = []
    radii = np.zeros(kp)
    for w in range(kp - k + 1):
        cols = slice(w, w + k)
        if method == "bonferroni":
            tv = bonferroni_calibrate(ScoreMatrix(np.vstack([s1[:, cols], s2[:, cols]])), alpha)
        else:
            cdfs = fit_cdfs(ScoreMatrix(s1[:, cols]))
            C = EmpiricalCopula(compute_u(cdfs, ScoreMatrix(s2[:, cols])))
            if method == "dichotomy":
                tv = dichotomy_search(C, cdfs, alpha)
            else:
                tv = sgd_search(C, cdfs, alpha, sgd or SgdConfig(), dim=forecaster.d)
        windows.append(tv)
        radii[cols] = np.maximum(radii[cols], tv.s_star)
    radii.setflags(write=False)
    return WindowedModel(forecaster, alpha, kp, windows, radii)


def ar_predict_reestimate(wm: WindowedModel, x: np.ndarray, series_id: Hashable = None) -> ConfidenceRegion:
    centers = wm.forecaster.roll(np.asarray(x, dtype=float)[None], wm.kp)[0]
    return _region(wm.alpha, centers, wm.radii, sid=series_id)


def ar_regions(forecaster: FittedForecaster, radii: np.ndarray, ds: Dataset, alpha: float) -> list[ConfidenceRegion]:
    """Batch version of the autoregressive predictors for a test set."""
    centers = forecaster.roll(ds.x, len(radii))
    return [_region(alpha, c, radii, sid=sid) for c, sid in zip(centers, ds.series_id)]
