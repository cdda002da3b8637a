"""Command-line entry point: ``simulate``, ``run`` and ``sweep``.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
3 too little data to calibrate.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dataset import Dataset, SplitSpec, generate, load_csv, write_csv
from .errors import CopulaCPTSError, InsufficientCalibration, ParseError
from .evaluate import calibration_sweep, evaluate, horizon_sweep, write_metrics_csv
from .forecaster import ForecasterSpec
from .pipeline import calibrate_prepared, predict_regions_batch, prepare
from .search import SgdConfig

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_CALIBRATION = 0, 1, 2, 3

MethodName = Literal["dichotomy", "sgd", "bonferroni", "l2concat"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataConfig(_Strict):
    generator: Optional[Literal["oscillator", "toy_ar"]] = None
    csv_path: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.generator is None) == (self.csv_path is None):
            raise ValueError("data needs exactly one of 'generator' or 'csv_path'")
        if "seed" in self.params:
            raise ValueError("data.params must not set 'seed'; use the top-level seed")
        if self.csv_path is not None and set(self.params) != {"t", "k"}:
            raise ValueError("csv data needs params {'t', 'k'} and nothing else")
        return self


class SplitConfig(_Strict):
    train_fraction: float = 0.45
    cal_fraction: float = 0.45
    test_fraction: float = 0.10
    cal_split_fraction: float = 0.5


class ForecasterConfig(_Strict):
    kind: Literal["persistence", "linear_ar"] = "linear_ar"
    ridge_lambda: float = 1e-3


class SgdSettings(_Strict):
    steps: int = SgdConfig.steps
    learning_rate: float = SgdConfig.learning_rate
    temperature: float = SgdConfig.temperature
    final_temperature: float = SgdConfig.final_temperature
    coverage_weight: float = SgdConfig.coverage_weight


class RunConfig(_Strict):
    """Experiment description; every random draw derives from ``seed``."""

    data: DataConfig
    split: SplitConfig = Field(default_factory=SplitConfig)
    forecaster: ForecasterConfig = Field(default_factory=ForecasterConfig)
    method: MethodName = "dichotomy"
    methods: Optional[list[MethodName]] = Field(default=None, min_length=1)
    alpha: Optional[float] = None
    alphas: Optional[list[float]] = Field(default=None, min_length=1)
    ks: Optional[list[int]] = Field(default=None, min_length=1)
    seed: int = 0
    seeds: Optional[list[int]] = Field(default=None, min_length=1)
    sgd: Optional[SgdSettings] = None
    output_dir: str = "out"

    @model_validator(mode="after")
    def _levels(self):
        for a in ([self.alpha] if self.alpha is not None else []) + list(self.alphas or []):
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha must be in (0, 1), got {a}")
        if self.alpha is not None and self.alphas is not None:
            raise ValueError("set either 'alpha' or 'alphas', not both")
        if self.ks is not None and self.data.generator is None:
            raise ValueError("'ks' needs a generator: a csv file has a fixed horizon")
        return self

    def split_spec(self, seed: int | None = None) -> SplitSpec:
        return SplitSpec(**self.split.model_dump(), seed=self.seed if seed is None else seed)

    def forecaster_spec(self) -> ForecasterSpec:
        return ForecasterSpec(**self.forecaster.model_dump())

    def sgd_config(self) -> SgdConfig:
        settings = self.sgd.model_dump() if self.sgd else {}
        return SgdConfig(**settings, seed=self.seed)

    def dataset(self, seed: int | None = None, k: int | None = None) -> Dataset:
        if self.data.csv_path is not None:
            return load_csv(self.data.csv_path, **self.data.params)
        params = dict(self.data.params)
        if k is not None:
            params["k" if self.data.generator == "oscillator" else "steps"] = k
        return generate({"generator": self.data.generator, **params, "seed": self.seed if seed is None else seed})


# ---------------------------------------------------------------------------
# commands


def _emit(summary: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(" ".join(f"{k}={v}" for k, v in summary.items()))


def _load_config(args) -> RunConfig:
    with open(args.config) as fh:
        raw = json.load(fh)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output_dir"] = args.out
    return RunConfig.model_validate(raw)


def cmd_simulate(args) -> int:
    params = {
        name: getattr(args, name)
        for name in ("n", "t", "k", "d", "sigma", "rho", "regime", "steps")
        if getattr(args, name) is not None
    }
    ds = generate({"generator": args.generator, **params, "seed": args.seed})
    out = Path(args.out)
    write_csv(ds, out)
    meta = {"seed": args.seed, "t": ds.meta.t, "k": ds.meta.k, "d": ds.meta.d, "params": ds.meta.params}
    meta_path = out.with_name(out.stem + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _emit({"n": len(ds), "data": str(out), "meta": str(meta_path)}, args.json)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    alpha = cfg.alpha if cfg.alpha is not None else 0.1
    prep = prepare(cfg.dataset(), cfg.split_spec(), cfg.forecaster_spec())
    model = calibrate_prepared(prep, alpha, cfg.method, cfg.sgd_config())
    report = evaluate(model, prep.test, cfg.seed)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(json.dumps(model.to_json(), indent=2) + "\n")
    regions = [r.to_json() for r in predict_regions_batch(model, prep.test)]
    (out / "regions.json").write_text(json.dumps(regions) + "\n")
    write_metrics_csv([report], out / "metrics.csv")
    _emit(
        {
            "method": report.method,
            "alpha": report.alpha,
            "joint_coverage": report.joint_coverage,
            "mean_measure": report.mean_measure,
        },
        args.json,
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    methods = cfg.methods or [cfg.method]
    seeds = cfg.seeds or [cfg.seed]
    if cfg.ks is not None:
        alpha = cfg.alpha if cfg.alpha is not None else 0.1
        rows = horizon_sweep(
            lambda k, s: cfg.dataset(seed=s, k=k), cfg.ks, cfg.split_spec(), cfg.forecaster_spec(),
            alpha, methods, seeds, cfg.sgd_config(),
        )
    else:
        alphas = cfg.alphas if cfg.alphas is not None else [cfg.alpha if cfg.alpha is not None else 0.1]
        rows = calibration_sweep(
            cfg.dataset(), cfg.split_spec(), cfg.forecaster_spec(), methods, alphas, seeds, cfg.sgd_config()
        )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(rows, out / "metrics.csv")
    _emit({"rows": len(rows), "metrics": str(out / "metrics.csv")}, args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="copulacpts", description="Copula conformal prediction for multi-step forecasts")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic dataset as CSV")
    sim.add_argument("--generator", choices=("oscillator", "toy_ar"), default="oscillator")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--t", type=int)
    sim.add_argument("--k", type=int)
    sim.add_argument("--d", type=int)
    sim.add_argument("--sigma", type=float)
    sim.add_argument("--rho", type=float)
    sim.add_argument("--regime", choices=("switching", "stationary"))
    sim.add_argument("--steps", type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="path of the CSV file to write")
    sim.add_argument("--json", action="store_true", help="print a one-line JSON summary")
    sim.set_defaults(func=cmd_simulate)

    for name, func, help_ in (
        ("run", cmd_run, "calibrate one model and evaluate it on the test split"),
        ("sweep", cmd_sweep, "evaluate over confidence levels (alphas) or horizons (ks)"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the configuration seed")
        sp.add_argument("--out", help="override output_dir")
        sp.add_argument("--json", action="store_true", help="print a one-line JSON summary")
        sp.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InsufficientCalibration as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, json.JSONDecodeError, CopulaCPTSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
