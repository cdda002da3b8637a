"""Nonconformity scores, rank quantiles, empirical CDFs and non-copula baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import InvalidLevel, ShapeMismatch, EmptySubset
from .forecaster import FittedForecaster

# Levels are treated as the decimals they were written as: ceil(0.9 * 10)
# must be 9 even though 0.9 is stored slightly above 9/10.
_RANK_EPS = 1e-9


def rank_for(level: float, m: int) -> int:
    """Smallest ``r`` with ``r / m >= level`` (1-based order-statistic index)."""
    return max(0, math.ceil(level * m - _RANK_EPS))


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Per-sample, per-step nonconformity scores ``s[i, j]``."""

    s: np.ndarray  # (n, k)
    source: str = ""

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if s.ndim != 2:
            raise ShapeMismatch(f"scores must be 2-D (n, k), got {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def k(self) -> int:
        return self.s.shape[1]


def step_errors(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    """Euclidean error of each step: ``(..., k, d) -> (..., k)``."""
    y, y_hat = np.asarray(y, dtype=float), np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ShapeMismatch(f"targets {y.shape} and forecasts {y_hat.shape} differ")
    diff = y - y_hat
    # scale by the largest component so huge errors do not overflow to inf
    scale = np.abs(diff).max(axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return (safe * np.sqrt(((diff / safe) ** 2).sum(axis=-1, keepdims=True)))[..., 0]


def nonconformity(f: FittedForecaster, ds: Dataset, source: str = "") -> ScoreMatrix:
    if ds.shape != (f.t, f.k, f.d):
        raise ShapeMismatch(f"dataset shape {ds.shape} does not match forecaster {(f.t, f.k, f.d)}")
    return ScoreMatrix(step_errors(ds.y, f.predict_batch(ds.x)), source)


def concat_nonconformity(f: FittedForecaster, ds: Dataset) -> np.ndarray:
    """Norm of the error over the whole flattened horizon, one score per sample."""
    if ds.shape != (f.t, f.k, f.d):
        raise ShapeMismatch(f"dataset shape {ds.shape} does not match forecaster {(f.t, f.k, f.d)}")
    resid = (ds.y - f.predict_batch(ds.x)).reshape(len(ds), -1)
    return np.sqrt((resid**2).sum(axis=1))


def quantile(level: float, scores: Sequence[float] | np.ndarray, augment_inf: bool = True) -> float:
    """Smallest ``s*`` whose empirical CDF reaches ``level``.

    With ``augment_inf`` the multiset is ``scores + [inf]``, so the result is
    ``+inf`` whenever the required rank ``ceil(level * (n + 1))`` exceeds ``n``.
    """
    if not 0.0 < level <= 1.0:
        raise InvalidLevel(f"level must be in (0, 1], got {level}")
    s = np.sort(np.asarray(scores, dtype=float).ravel())
    if s.size == 0:
        raise EmptySubset("quantile of an empty score set")
    m = s.size + (1 if augment_inf else 0)
    r = rank_for(level, m)
    return float(s[r - 1]) if r <= s.size else math.inf


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Right-continuous step CDF ``F(s) = #{s_i <= s} / n`` of one horizon step."""

    sorted_scores: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.sorted_scores, dtype=float).ravel())
        if s.size == 0:
            raise EmptySubset("cannot fit a CDF to zero scores")
        s.setflags(write=False)
        object.__setattr__(self, "sorted_scores", s)

    @property
    def n(self) -> int:
        return self.sorted_scores.size

    def __call__(self, s):
        counts = np.searchsorted(self.sorted_scores, s, side="right")
        return counts / self.n

    def inverse(self, p):
        """Smallest sample score ``s`` with ``F(s) >= p``; vectorised over ``p``."""
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
            raise InvalidLevel(f"p must be in [0, 1], got {p}")
        r = np.maximum(np.ceil(p_arr * self.n - _RANK_EPS).astype(int), 1)
        out = self.sorted_scores[r - 1]
        return float(out) if np.ndim(out) == 0 else out

    def score_at_rank(self, i):
        """Threshold for grid level ``i / n``; ``i > n`` means unbounded (+inf)."""
        i = np.asarray(i, dtype=int)
        out = np.where(i > self.n, math.inf, self.sorted_scores[np.clip(i, 1, self.n) - 1])
        return float(out) if out.ndim == 0 else out


def cdf_fit(scores_j) -> EmpiricalCdf:
    return EmpiricalCdf(scores_j)


def cdf_eval(F: EmpiricalCdf, s):
    out = F(s)
    return float(out) if np.ndim(out) == 0 else out


def cdf_inverse(F: EmpiricalCdf, p):
    return F.inverse(p)


def fit_cdfs(scores: ScoreMatrix) -> list[EmpiricalCdf]:
    return [EmpiricalCdf(scores.s[:, j]) for j in range(scores.k)]


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidLevel(f"alpha must be in (0, 1), got {alpha}")


def bonferroni_calibrate(scores: ScoreMatrix, alpha: float):
    """Per-step ICP thresholds at level ``1 - alpha / k`` (union-bound baseline)."""
    from .search import ThresholdVector

    _check_alpha(alpha)
    level = 1.0 - alpha / scores.k
    s_star = np.array([quantile(level, scores.s[:, j], augment_inf=True) for j in range(scores.k)])
    return ThresholdVector.from_thresholds(s_star, fit_cdfs(scores), "bonferroni")


def l2_concat_calibrate(scores_concat, alpha: float) -> float:
    """Radius of one ball over the flattened horizon (ICP on the full-horizon norm)."""
    _check_alpha(alpha)
    return quantile(1.0 - alpha, scores_concat, augment_inf=True)
