"""Frechet regression with modifier-dependent coefficients for metric-space responses."""

from ._accel import BACKEND
from .baselines import GFRPredictor, LFRPredictor, PFRPredictor, gfr_predict, lfr_predict, pfr_predict
from .errors import (
    ConfigurationError,
    DegenerateNeighborhoodError,
    FrechetVCMError,
    NoFeasibleBandwidthError,
    NumericalError,
    SingularDesignError,
    UnsupportedModifierError,
)
from .kernels import GAUSSIAN, Kernel, WeightKind, WeightScheme
from .metric_spaces import (
    QuantileFunction,
    QuantileSpace,
    ScalarPoint,
    ScalarSpace,
    SPDPoint,
    SPDSpace,
    quantile_grid,
)
from .model_selection import CVConfig, CVResult, fit_method, gmse, select_bandwidth
from .training import FittedPredictor, TrainingSet
from .vfr import VFRPredictor, euclidean_vcm_predict, vfr_predict

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CVConfig",
    "CVResult",
    "ConfigurationError",
    "DegenerateNeighborhoodError",
    "FittedPredictor",
    "FrechetVCMError",
    "GAUSSIAN",
    "GFRPredictor",
    "Kernel",
    "LFRPredictor",
    "NoFeasibleBandwidthError",
    "NumericalError",
    "PFRPredictor",
    "QuantileFunction",
    "QuantileSpace",
    "SPDPoint",
    "SPDSpace",
    "ScalarPoint",
    "ScalarSpace",
    "SingularDesignError",
    "TrainingSet",
    "UnsupportedModifierError",
    "VFRPredictor",
    "WeightKind",
    "WeightScheme",
    "euclidean_vcm_predict",
    "fit_method",
    "gfr_predict",
    "gmse",
    "lfr_predict",
    "pfr_predict",
    "quantile_grid",
    "select_bandwidth",
    "vfr_predict",
]
