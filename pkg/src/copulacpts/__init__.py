"""Copula conformal prediction for multivariate multi-step time-series forecasts."""

from .conformal import (
    EmpiricalCdf,
    ScoreMatrix,
    bonferroni_calibrate,
    cdf_eval,
    cdf_fit,
    cdf_inverse,
    l2_concat_calibrate,
    nonconformity,
    quantile,
)
from .copula import EmpiricalCopula, compute_u, copula_eval, frechet_bounds, partial_order_leq, product_copula
from .dataset import Dataset, DatasetMeta, SplitSpec, TimeSeriesSample, gen_oscillator, gen_toy_ar, load_csv, split
from .evaluate import EvalReport, ball_measure, calibration_sweep, coverage, horizon_sweep
from .forecaster import FittedForecaster, ForecasterSpec, fit, predict
from .pipeline import (
    CalibratedModel,
    ConfidenceRegion,
    ar_calibrate_reestimate,
    ar_predict_fixed,
    ar_predict_reestimate,
    calibrate,
    predict_regions,
)
from .search import SgdConfig, ThresholdVector, dichotomy_search, sgd_search, verify_feasible

__version__ = "0.1.0"
