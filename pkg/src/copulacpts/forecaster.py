"""Point forecasters: a fit-then-predict contract and two cheap built-ins."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .dataset import Dataset
from .errors import InvalidParam, NonFinite, ShapeMismatch, SingularSystem

KINDS = ("persistence", "linear_ar")


@dataclass(frozen=True)
class ForecasterSpec:
    kind: Literal["persistence", "linear_ar"] = "linear_ar"
    ridge_lambda: float = 1e-3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParam(f"forecaster kind must be one of {KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.ridge_lambda) and self.ridge_lambda >= 0):
            raise InvalidParam(f"ridge_lambda must be finite and >= 0, got {self.ridge_lambda}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "ridge_lambda": self.ridge_lambda}


@dataclass(frozen=True, eq=False)
class FittedForecaster:
    """A trained k-step forecaster. ``predict`` is pure."""

    spec: ForecasterSpec
    t: int
    k: int
    d: int
    coef: np.ndarray | None = None  # (t*d, k*d)
    intercept: np.ndarray | None = None  # (k*d,)

    def _check(self, x: np.ndarray, batched: bool) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        want = (self.t, self.d)
        got = x.shape[1:] if batched else x.shape
        if x.ndim != (3 if batched else 2) or got != want:
            raise ShapeMismatch(f"expected input of shape {want}, got {x.shape}")
        if not np.isfinite(x).all():
            raise NonFinite("forecaster input contains NaN or Inf")
        return x

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forecast the ``(k, d)`` horizon for one ``(t, d)`` input window."""
        return self.predict_batch(self._check(x, batched=False)[None])[0]

    def predict_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = self._check(xs, batched=True)
        if self.spec.kind == "persistence":
            return np.repeat(xs[:, -1:, :], self.k, axis=1)
        flat = xs.reshape(len(xs), -1) @ self.coef + self.intercept
        return flat.reshape(len(xs), self.k, self.d)

    def roll(self, xs: np.ndarray, horizon: int) -> np.ndarray:
        """Autoregressive forecast of ``horizon >= k`` steps for a batch of inputs.

        Window ``w`` feeds the model the input shifted ``w`` steps forward,
        padded with the forecasts made so far, and keeps only its last output.
        """
        if horizon < self.k:
            raise InvalidParam(f"horizon must be >= k={self.k}, got {horizon}")
        xs = self._check(xs, batched=True)
        out = self.predict_batch(xs)
        for w in range(1, horizon - self.k + 1):
            seq = np.concatenate([xs, out], axis=1)
            nxt = self.predict_batch(seq[:, w:w + self.t])[:, -1:]
            out = np.concatenate([out, nxt], axis=1)
        return out


def fit(spec: ForecasterSpec, train: Dataset) -> FittedForecaster:
    """Train ``spec`` on ``train``.

    ``linear_ar`` solves a ridge regression from the flattened input window
    (plus an unpenalised bias) to the flattened horizon.
    """
    t, k, d = train.shape
    if spec.kind == "persistence":
        return FittedForecaster(spec, t, k, d)
    X = train.x.reshape(len(train), -1)
    Y = train.y.reshape(len(train), -1)
    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - x_mean, Y - y_mean
    gram = Xc.T @ Xc
    if spec.ridge_lambda == 0.0 and np.linalg.matrix_rank(Xc) < Xc.shape[1]:
        raise SingularSystem("design matrix is rank deficient; use ridge_lambda > 0")
    gram[np.diag_indices_from(gram)] += spec.ridge_lambda
    try:
        coef = np.linalg.solve(gram, Xc.T @ Yc)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    intercept = y_mean - x_mean @ coef
    coef.setflags(write=False)
    intercept.setflags(write=False)
    return FittedForecaster(spec, t, k, d, coef, intercept)


def predict(f: FittedForecaster, x: np.ndarray) -> np.ndarray:
    return f.predict(x)


def ridge_objective(f: FittedForecaster, ds: Dataset) -> float:
    """Penalised squared error of a ``linear_ar`` model on ``ds``."""
    resid = ds.y.reshape(len(ds), -1) - f.predict_batch(ds.x).reshape(len(ds), -1)
    return float((resid**2).sum() + f.spec.ridge_lambda * (f.coef**2).sum())
