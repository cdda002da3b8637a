"""Time-series samples, synthetic generators, CSV ingestion and splitting.

A :class:`Dataset` stacks ``n`` samples into two arrays, ``x`` of shape
``(n, t, d)`` (input windows) and ``y`` of shape ``(n, k, d)`` (target
horizons). Samples are treated as exchangeable draws; their order carries no
meaning beyond determinism.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Hashable, Iterator, Sequence

import numpy as np

from .errors import (
    EmptySubset,
    InvalidParam,
    NonFinite,
    ParseError,
    RaggedSeries,
    ShapeMismatch,
)

# Guards floor/ceil against products such as 0.29 * 100 == 28.999999999999996.
_ROUND_EPS = 1e-9


@dataclass(frozen=True)
class TimeSeriesSample:
    series_id: Hashable
    x: np.ndarray  # (t, d)
    y: np.ndarray  # (k, d)


@dataclass(frozen=True)
class DatasetMeta:
    t: int
    k: int
    d: int
    source: str = "unknown"
    seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable, shape-homogeneous collection of (input window, horizon) pairs."""

    x: np.ndarray
    y: np.ndarray
    series_id: tuple
    meta: DatasetMeta

    def __post_init__(self):
        x, y = np.asarray(self.x, dtype=float), np.asarray(self.y, dtype=float)
        if x.ndim != 3 or y.ndim != 3:
            raise ShapeMismatch(f"expected x (n,t,d) and y (n,k,d), got {x.shape} and {y.shape}")
        if x.shape[0] != y.shape[0] or x.shape[2] != y.shape[2]:
            raise ShapeMismatch(f"x {x.shape} and y {y.shape} disagree on n or d")
        n, t, d = x.shape
        k = y.shape[1]
        if n < 1:
            raise EmptySubset("a dataset needs at least one sample")
        if min(t, k, d) < 1:
            raise ShapeMismatch(f"t, k, d must be >= 1, got {(t, k, d)}")
        if len(self.series_id) != n:
            raise ShapeMismatch(f"{len(self.series_id)} ids for {n} samples")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise NonFinite("dataset entries must be finite")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "series_id", tuple(self.series_id))
        if (self.meta.t, self.meta.k, self.meta.d) != (t, k, d):
            object.__setattr__(self, "meta", replace(self.meta, t=t, k=k, d=d))

    @classmethod
    def from_samples(cls, samples: Sequence[TimeSeriesSample], meta: DatasetMeta | None = None) -> "Dataset":
        if not samples:
            raise EmptySubset("a dataset needs at least one sample")
        shapes = {(np.shape(s.x), np.shape(s.y)) for s in samples}
        if len(shapes) != 1:
            raise ShapeMismatch(f"heterogeneous sample shapes: {sorted(shapes)}")
        x = np.stack([np.asarray(s.x, dtype=float) for s in samples])
        y = np.stack([np.asarray(s.y, dtype=float) for s in samples])
        if meta is None:
            meta = DatasetMeta(t=x.shape[1], k=y.shape[1], d=x.shape[2])
        return cls(x, y, tuple(s.series_id for s in samples), meta)

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, i: int) -> TimeSeriesSample:
        return TimeSeriesSample(self.series_id[i], self.x[i], self.y[i])

    def __iter__(self) -> Iterator[TimeSeriesSample]:
        return (self[i] for i in range(len(self)))

    @property
    def samples(self) -> list[TimeSeriesSample]:
        return list(self)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.meta.t, self.meta.k, self.meta.d

    def subset(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        if idx.size == 0:
            raise EmptySubset("subset would be empty")
        return Dataset(self.x[idx], self.y[idx], tuple(self.series_id[i] for i in idx), self.meta)

    def truncate_horizon(self, k: int) -> "Dataset":
        """Keep only the first ``k`` target steps (used to train a shorter-horizon model)."""
        if not 1 <= k <= self.meta.k:
            raise InvalidParam(f"k must be in [1, {self.meta.k}], got {k}")
        return Dataset(self.x, self.y[:, :k], self.series_id, self.meta)

    def shifted(self, offset: Sequence[float]) -> "Dataset":
        """Add a constant d-vector to every step of every series."""
        offset = np.asarray(offset, dtype=float)
        return Dataset(self.x + offset, self.y + offset, self.series_id, self.meta)


def concat(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise EmptySubset("nothing to concatenate")
    if len({p.shape for p in parts}) != 1:
        raise ShapeMismatch("cannot concatenate datasets of different shapes")
    return Dataset(
        np.concatenate([p.x for p in parts]),
        np.concatenate([p.y for p in parts]),
        tuple(i for p in parts for i in p.series_id),
        parts[0].meta,
    )


# ---------------------------------------------------------------------------
# Splitting


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.45
    cal_fraction: float = 0.45
    test_fraction: float = 0.10
    cal_split_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("train_fraction", "cal_fraction", "test_fraction", "cal_split_fraction"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidParam(f"{name} must be in (0, 1), got {v}")
        total = self.train_fraction + self.cal_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise InvalidParam(f"split fractions must sum to 1, got {total}")

    def sizes(self, n: int) -> tuple[int, int, int, int]:
        """Subset sizes (train, cal1, cal2, test) for a dataset of ``n`` samples.

        Train and calibration take the floor of their share, test takes the
        remainder, and cal1 takes the ceiling of its share of calibration.
        """
        n_train = math.floor(n * self.train_fraction + _ROUND_EPS)
        n_cal = math.floor(n * self.cal_fraction + _ROUND_EPS)
        n_test = n - n_train - n_cal
        n_cal1 = min(n_cal, math.ceil(n_cal * self.cal_split_fraction - _ROUND_EPS))
        return n_train, n_cal1, n_cal - n_cal1, n_test


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset, Dataset]:
    """Randomly partition ``ds`` into (train, cal1, cal2, test)."""
    n = len(ds)
    sizes = spec.sizes(n)
    names = ("train", "cal1", "cal2", "test")
    empty = [nm for nm, s in zip(names, sizes) if s <= 0]
    if empty:
        raise EmptySubset(f"split of {n} samples leaves {', '.join(empty)} empty (sizes {sizes})")
    perm = np.random.default_rng(spec.seed).permutation(n)
    bounds = np.cumsum((0,) + sizes)
    return tuple(ds.subset(perm[bounds[i]:bounds[i + 1]]) for i in range(4))  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# CSV ingestion


def load_csv(path: str | os.PathLike, t: int, k: int) -> Dataset:
    """Read long-format rows ``series_id, step_index, dim_0, ..., dim_{d-1}``.

    Each series must have exactly ``t + k`` rows with step indices
    ``0 .. t+k-1``; the first ``t`` steps become the input window.
    """
    if t < 1 or k < 1:
        raise InvalidParam(f"t and k must be >= 1, got t={t}, k={k}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header[:2] != ["series_id", "step_index"]:
            raise ParseError(f"{path}: header must start with series_id,step_index")
        dims = header[2:]
        if not dims or dims != [f"dim_{j}" for j in range(len(dims))]:
            raise ParseError(f"{path}: expected columns dim_0..dim_{{d-1}}, got {dims}")
        d = len(dims)
        series: dict[str, dict[int, list[float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise ParseError(f"{path}:{lineno}: expected {d + 2} fields, got {len(row)}")
            sid = row[0].strip()
            try:
                step = int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise NonFinite(f"{path}:{lineno}: non-finite entry in series {sid!r}")
            steps = series.setdefault(sid, {})
            if step in steps:
                raise RaggedSeries(f"{path}:{lineno}: duplicate step {step} in series {sid!r}")
            steps[step] = values
    if not series:
        raise ParseError(f"{path}: no data rows")
    length = t + k
    xs, ys = [], []
    for sid, steps in series.items():
        if sorted(steps) != list(range(length)):
            raise RaggedSeries(
                f"{path}: series {sid!r} has steps {min(steps)}..{max(steps)} "
                f"({len(steps)} rows), expected 0..{length - 1}"
            )
        arr = np.array([steps[i] for i in range(length)])
        xs.append(arr[:t])
        ys.append(arr[t:])
    meta = DatasetMeta(t=t, k=k, d=d, source=f"csv:{os.fspath(path)}")
    return Dataset(np.stack(xs), np.stack(ys), tuple(series), meta)


def write_csv(ds: Dataset, path: str | os.PathLike) -> None:
    """Write ``ds`` in the long format read by :func:`load_csv`."""
    t, k, d = ds.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series_id", "step_index"] + [f"dim_{j}" for j in range(d)])
        for sid, x, y in zip(ds.series_id, ds.x, ds.y):
            for step, row in enumerate(np.concatenate([x, y])):
                w.writerow([sid, step] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# Synthetic generators


def gen_oscillator(
    n: int,
    t: int,
    k: int,
    d: int = 2,
    sigma: float = 0.05,
    rho: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Damped oscillations with additive Gaussian noise on the forecast horizon.

    Dimension ``l`` follows ``c_l + A_l * exp(-g * s) * cos(w_l * s + phi_l)``
    with per-series offset, amplitude and phase; the frequency ``w_l`` and
    damping ``g`` are shared so the future is a linear function of the past.
    The input window is observed exactly. Each horizon step receives
    ``sigma * (sqrt(rho) * z_0 + sqrt(1 - rho) * z_j)`` with ``z`` standard
    normal d-vectors, so ``rho=0`` gives independent noise across steps and
    ``rho=1`` one shared draw per series.

    Signal and noise use separate random streams: changing ``sigma`` or
    ``rho`` leaves the noiseless trajectories untouched.
    """
    if n < 1 or t < 1 or k < 1 or d < 1:
        raise InvalidParam(f"n, t, k, d must be >= 1, got {(n, t, k, d)}")
    if not (math.isfinite(sigma) and sigma >= 0):
        raise InvalidParam(f"sigma must be finite and >= 0, got {sigma}")
    if not 0.0 <= rho <= 1.0:
        raise InvalidParam(f"rho must be in [0, 1], got {rho}")
    signal_rng, noise_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))

    omega = 2 * np.pi / (12.0 + 5.0 * np.arange(d))
    damping = 0.03
    offset = signal_rng.uniform(-1.0, 1.0, size=(n, 1, d))
    amp = signal_rng.uniform(0.5, 1.5, size=(n, 1, d))
    phase = signal_rng.uniform(0.0, 2 * np.pi, size=(n, 1, d))
    s = np.arange(t + k, dtype=float)[None, :, None]
    clean = offset + amp * np.exp(-damping * s) * np.cos(omega * s + phase)

    shared = noise_rng.standard_normal((n, 1, d))
    own = noise_rng.standard_normal((n, k, d))
    noise = sigma * (math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * own)

    x = clean[:, :t]
    y = clean[:, t:] + noise
    params = dict(generator="oscillator", n=n, t=t, k=k, d=d, sigma=sigma, rho=rho, seed=seed)
    return Dataset(x, y, tuple(range(n)), DatasetMeta(t, k, d, "oscillator", seed, params))


TOY_REGIMES = ("switching", "stationary")


def gen_toy_ar(n: int, regime: str = "switching", seed: int = 0, steps: int = 3, phi: float = 0.8) -> Dataset:
    """Standard-normal toy series whose inter-step dependence may change over time.

    The input window is a single independent N(0, 1) step. The ``steps``
    target values are each marginally N(0, 1):

    * ``stationary`` -- a Gaussian AR(1) chain with lag-one correlation
      ``phi``; every pair of consecutive steps has the same copula.
    * ``switching`` -- steps 0 and 1 are identical (comonotone) while every
      later step is an independent draw, so the copula fitted on the first
      pair does not describe the following ones.
    """
    if n < 1:
        raise InvalidParam(f"n must be >= 1, got {n}")
    if regime not in TOY_REGIMES:
        raise InvalidParam(f"regime must be one of {TOY_REGIMES}, got {regime!r}")
    if steps < 2:
        raise InvalidParam(f"steps must be >= 2, got {steps}")
    if not -1.0 < phi < 1.0:
        raise InvalidParam(f"phi must be in (-1, 1), got {phi}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 1, 1))
    z = rng.standard_normal((n, steps))
    y = np.empty((n, steps))
    if regime == "stationary":
        y[:, 0] = z[:, 0]
        innov = math.sqrt(1.0 - phi * phi)
        for j in range(1, steps):
            y[:, j] = phi * y[:, j - 1] + innov * z[:, j]
    else:
        y[:, 0] = z[:, 0]
        y[:, 1] = z[:, 0]
        y[:, 2:] = z[:, 2:]
    params = dict(generator="toy_ar", n=n, regime=regime, steps=steps, phi=phi, seed=seed)
    return Dataset(x, y[:, :, None], tuple(range(n)), DatasetMeta(1, steps, 1, f"toy_ar:{regime}", seed, params))


GENERATORS = {"oscillator": gen_oscillator, "toy_ar": gen_toy_ar}


def generate(config: dict[str, Any]) -> Dataset:
    """Build a synthetic dataset from ``{"generator": name, **kwargs}``."""
    config = dict(config)
    name = config.pop("generator", None)
    if name not in GENERATORS:
        raise InvalidParam(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    try:
        return GENERATORS[name](**config)
    except TypeError as exc:
        raise InvalidParam(str(exc)) from None
