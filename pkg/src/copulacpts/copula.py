"""Empirical copula on per-step CDF values, plus reference copulas and bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conformal import EmpiricalCdf, ScoreMatrix
from .errors import InvalidInput, ShapeMismatch


def compute_u(cdfs: Sequence[EmpiricalCdf], scores2: ScoreMatrix) -> np.ndarray:
    """Apply each step's CDF to its column of scores: ``u[i, j] = F_j(s[i, j])``."""
    if len(cdfs) != scores2.k:
        raise ShapeMismatch(f"{len(cdfs)} CDFs for {scores2.k} horizon steps")
    u = np.column_stack([F(scores2.s[:, j]) for j, F in enumerate(cdfs)])
    u.setflags(write=False)
    return u


def _as_unit_vector(u, k: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (k,):
        raise ShapeMismatch(f"expected vectors of length {k}, got shape {u.shape}")
    if np.any(np.isnan(u)) or np.any((u < 0) | (u > 1)):
        raise InvalidInput("copula arguments must lie in [0, 1]")
    return u


@dataclass(frozen=True, eq=False)
class EmpiricalCopula:
    """Rank-count copula of calibration points, augmented by one point at infinity.

    ``C(u) = #{i : u_i < u coordinatewise} / (m + 1)``. The extra point is never
    strictly dominated, so it only enters through the denominator.
    """

    points: np.ndarray  # (m, k)

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 2 or p.shape[0] < 1:
            raise ShapeMismatch(f"copula needs a non-empty (m, k) matrix, got {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1]

    def count_dominated(self, u) -> np.ndarray | int:
        """Number of points strictly below ``u`` in every coordinate.

        Accepts a single vector or a batch ``(q, k)``; ``+inf`` entries are
        allowed and dominate every point in that coordinate.
        """
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return int(np.all(self.points < u, axis=1).sum())
        return np.all(self.points[None, :, :] < u[:, None, :], axis=2).sum(axis=1)

    def __call__(self, u):
        u = _as_unit_vector(u, self.k)
        return self.count_dominated(u) / (self.m + 1)


def copula_eval(C: EmpiricalCopula, u) -> float:
    return float(C(u))


def partial_order_leq(a, b) -> bool:
    """``a`` precedes ``b`` iff every coordinate of ``a`` is <= that of ``b``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"cannot compare vectors of shapes {a.shape} and {b.shape}")
    return bool(np.all(a <= b))


def frechet_bounds(u) -> tuple[float, float]:
    """Lower and upper Frechet-Hoeffding bounds valid for every copula at ``u``."""
    u = np.asarray(u, dtype=float)
    _as_unit_vector(u, u.shape[-1] if u.ndim else 0)
    k = u.size
    return max(1.0 - k + float(u.sum()), 0.0), float(u.min())


def product_copula(u) -> float:
    u = np.asarray(u, dtype=float)
    _as_unit_vector(u, u.shape[-1] if u.ndim else 0)
    return float(np.prod(u))
