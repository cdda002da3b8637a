"""Threshold search under the empirical-copula coverage constraint.

All searches work on the rank grid of each step's CDF: grid index ``i`` in
``0..n`` stands for level ``i / n`` (threshold = the ``i``-th smallest
calibration score) and index ``n + 1`` stands for an unbounded threshold.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal, Sequence

import numpy as np

from .conformal import EmpiricalCdf, rank_for
from .copula import EmpiricalCopula
from .errors import InvalidLevel, InvalidParam, ShapeMismatch

Method = Literal["dichotomy", "sgd", "bonferroni", "l2concat"]
METHODS = ("dichotomy", "sgd", "bonferroni", "l2concat")
COPULA_METHODS = ("dichotomy", "sgd")


@dataclass(frozen=True, eq=False)
class ThresholdVector:
    s_star: np.ndarray  # (k,), +inf marks an unbounded step
    alpha_j: np.ndarray  # (k,), 1 - F_j(s_star[j])
    method: str

    @classmethod
    def from_thresholds(cls, s_star, cdfs: Sequence[EmpiricalCdf], method: str) -> "ThresholdVector":
        s_star = np.asarray(s_star, dtype=float)
        if s_star.shape != (len(cdfs),):
            raise ShapeMismatch(f"{s_star.shape} thresholds for {len(cdfs)} CDFs")
        alpha_j = np.array([1.0 - float(F(s)) for F, s in zip(cdfs, s_star)])
        for a in (s_star, alpha_j):
            a.setflags(write=False)
        return cls(s_star, alpha_j, method)

    @property
    def k(self) -> int:
        return self.s_star.size

    @property
    def unbounded(self) -> np.ndarray:
        return np.isinf(self.s_star)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "s_star": [None if math.isinf(s) else float(s) for s in self.s_star],
            "alpha_j": [float(a) for a in self.alpha_j],
        }


@dataclass(frozen=True)
class SgdConfig:
    steps: int = 500
    learning_rate: float = 0.05
    temperature: float = 1.0  # initial sigmoid width in log-odds units
    final_temperature: float = 0.03  # width reached by geometric annealing
    seed: int = 0
    coverage_weight: float = 1000.0

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidParam(f"steps must be >= 1, got {self.steps}")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise InvalidParam(f"temperature must be finite and > 0, got {self.temperature}")
        if not (math.isfinite(self.final_temperature) and 0 < self.final_temperature <= self.temperature):
            raise InvalidParam(
                f"final_temperature must be in (0, temperature={self.temperature}], got {self.final_temperature}"
            )
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidParam(f"learning_rate must be finite and > 0, got {self.learning_rate}")
        if not (math.isfinite(self.coverage_weight) and self.coverage_weight > 0):
            raise InvalidParam(f"coverage_weight must be finite and > 0, got {self.coverage_weight}")

    def to_json(self) -> dict:
        return asdict(self)


def _check(C: EmpiricalCopula, cdfs: Sequence[EmpiricalCdf], alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidLevel(f"alpha must be in (0, 1), got {alpha}")
    if len(cdfs) != C.k:
        raise ShapeMismatch(f"{len(cdfs)} CDFs for a {C.k}-dimensional copula")


def threshold_levels(cdfs: Sequence[EmpiricalCdf], s_star) -> np.ndarray:
    """CDF level reached by each threshold; ``+inf`` for unbounded steps."""
    return np.array([math.inf if math.isinf(s) else float(F(s)) for F, s in zip(cdfs, s_star)])


def _feasible_levels(C: EmpiricalCopula, levels: np.ndarray, required: int) -> bool:
    if np.all(np.isinf(levels)):
        return True
    return C.count_dominated(levels) >= required


def verify_feasible(
    C: EmpiricalCopula,
    cdfs: Sequence[EmpiricalCdf],
    s_star: ThresholdVector | Sequence[float],
    alpha: float,
) -> bool:
    """Exact check that ``C(F_1(s_1), ..., F_k(s_k)) >= 1 - alpha``.

    A vector of all-unbounded thresholds covers every outcome and is always
    accepted.
    """
    _check(C, cdfs, alpha)
    s = s_star.s_star if isinstance(s_star, ThresholdVector) else np.asarray(s_star, dtype=float)
    if s.shape != (C.k,):
        raise ShapeMismatch(f"{s.shape} thresholds for a {C.k}-dimensional copula")
    return _feasible_levels(C, threshold_levels(cdfs, s), rank_for(1.0 - alpha, C.m + 1))


def _thresholds_from_indices(cdfs: Sequence[EmpiricalCdf], idx: Sequence[int]) -> np.ndarray:
    return np.array([F.score_at_rank(i) for F, i in zip(cdfs, idx)], dtype=float)


def dichotomy_search(
    C: EmpiricalCopula,
    cdfs: Sequence[EmpiricalCdf],
    alpha: float,
    tol: float = 1e-9,
) -> ThresholdVector:
    """Bisection for the smallest level shared by all steps that meets the constraint.

    Candidate levels are the grid values ``i / n_j`` at or above ``1 - alpha``
    plus an unbounded level; bisection stops once the bracket is a single grid
    step or narrower than ``tol``.
    """
    _check(C, cdfs, alpha)
    if not tol > 0:
        raise InvalidParam(f"tol must be > 0, got {tol}")
    target = 1.0 - alpha
    grid = np.unique(np.concatenate([np.arange(F.n + 1) / F.n for F in cdfs]))
    cand = np.append(grid[grid >= target - 1e-12], math.inf)
    required = rank_for(target, C.m + 1)

    def thresholds(level: float) -> np.ndarray:
        if math.isinf(level):
            return np.full(C.k, math.inf)
        return np.array([F.inverse(level) for F in cdfs])

    def feasible(i: int) -> bool:
        return _feasible_levels(C, threshold_levels(cdfs, thresholds(cand[i])), required)

    hi = len(cand) - 1
    if feasible(0):
        hi = 0
    else:
        lo = 0
        while hi - lo > 1 and not (cand[hi] - cand[lo] <= tol):
            mid = (lo + hi) // 2
            if feasible(mid):
                hi = mid
            else:
                lo = mid
    return ThresholdVector.from_thresholds(thresholds(cand[hi]), cdfs, "dichotomy")


_SHIFT_RANGE = 40.0
_SHIFT_TOL = 1e-12


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _ball_power(r, dim: int):
    """Ball measure up to the constant factor pi^(d/2) / Gamma(d/2 + 1)."""
    return np.power(r, dim)


def sgd_search(
    C: EmpiricalCopula,
    cdfs: Sequence[EmpiricalCdf],
    alpha: float,
    cfg: SgdConfig = SgdConfig(),
    dim: int = 1,
) -> ThresholdVector:
    """Per-step levels found by Adam on a smoothed coverage/area objective.

    The coverage indicator ``1[u_ij < q_j]`` is replaced by a sigmoid of the
    log-odds gap whose width is annealed geometrically from ``cfg.temperature``
    to ``cfg.final_temperature``; the loss is the normalised
    summed ball measure plus a squared hinge on the coverage shortfall. The
    optimiser only fixes the shape of the level vector: its overall scale is
    then set exactly by bisecting a common log-odds shift against the exact
    verifier, with levels rounded up to the rank grid.
    """
    _check(C, cdfs, alpha)
    if dim < 1:
        raise InvalidParam(f"dim must be >= 1, got {dim}")
    target = 1.0 - alpha
    k, u = C.k, C.points
    ns = np.array([F.n for F in cdfs])
    sorted_scores = [F.sorted_scores for F in cdfs]

    # slopes are secants over +-h ranks: single order-statistic gaps are too noisy
    hs = np.maximum(1, np.ceil(np.sqrt(ns)).astype(int))

    def radius_and_slope(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # piecewise-linear inverse CDF through the order statistics
        r, dr = np.empty(k), np.zeros(k)
        for j, s in enumerate(sorted_scores):
            n = ns[j]
            if n == 1:
                r[j] = s[0]
                continue
            pos = min(max(q[j] * n, 1.0), float(n))
            lo = min(int(pos), n - 1)
            r[j] = s[lo - 1] + (pos - lo) * (s[lo] - s[lo - 1])
            a, b = max(lo - hs[j], 1), min(lo + hs[j], n)
            dr[j] = (s[b - 1] - s[a - 1]) * n / (b - a)
        return r, dr

    ref = _ball_power(radius_and_slope(np.full(k, target))[0], dim).sum()
    ref = ref if ref > 0 else 1.0

    rng = np.random.default_rng(cfg.seed)
    # smoothing acts on log-odds so its width tracks the rank spacing near 1
    edge = 0.5 / ns
    logit_u = _logit(np.clip(u, edge, 1.0 - edge))
    q0 = np.clip(1.0 - alpha / k, edge, 1.0 - edge)
    v = _logit(q0) + rng.normal(0.0, 0.01, size=k)
    m1, m2 = np.zeros(k), np.zeros(k)
    b1, b2, eps = 0.9, 0.999, 1e-8
    # a wide start gives every step a gradient; the narrow end stops the
    # surrogate from trading cheap steps up against expensive ones
    decay = (cfg.final_temperature / cfg.temperature) ** (1.0 / max(cfg.steps - 1, 1))
    for step in range(1, cfg.steps + 1):
        T = cfg.temperature * decay ** (step - 1)
        q = _sigmoid(v)
        sig = _sigmoid((v[None, :] - logit_u) / T)  # (m, k)
        prod = sig.prod(axis=1)
        cov = prod.sum() / (C.m + 1)
        dcov = (prod[:, None] * (1.0 - sig)).sum(axis=0) / (T * (C.m + 1))
        r, dr = radius_and_slope(q)
        darea = dim * np.power(r, dim - 1) * dr * q * (1.0 - q) / ref
        short = max(target - cov, 0.0)
        g = darea - 2.0 * cfg.coverage_weight * short * dcov
        m1 = b1 * m1 + (1 - b1) * g
        m2 = b2 * m2 + (1 - b2) * g * g
        v = v - cfg.learning_rate * (m1 / (1 - b1**step)) / (np.sqrt(m2 / (1 - b2**step)) + eps)

    required = rank_for(target, C.m + 1)

    def indices(shift: float) -> np.ndarray:
        q = _sigmoid(v + shift)
        return np.clip(np.ceil(q * ns - 1e-9).astype(int), 0, ns)

    def feasible(ix) -> bool:
        return _feasible_levels(C, threshold_levels(cdfs, _thresholds_from_indices(cdfs, ix)), required)

    # exact calibration of the overall scale: bisect a common log-odds shift
    lo, hi = -_SHIFT_RANGE, _SHIFT_RANGE
    if not feasible(indices(hi)):
        idx = ns + 1  # nothing bounded is feasible
    else:
        while hi - lo > _SHIFT_TOL and not np.array_equal(indices(lo), indices(hi)):
            mid = 0.5 * (lo + hi)
            if feasible(indices(mid)):
                hi = mid
            else:
                lo = mid
        idx = indices(hi)
    return ThresholdVector.from_thresholds(_thresholds_from_indices(cdfs, idx), cdfs, "sgd")
