"""Method construction, GMSE evaluation and k-fold bandwidth selection."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import GFRPredictor, LFRPredictor, PFRPredictor
from .errors import ConfigurationError, NoFeasibleBandwidthError, NumericalError
from .kernels import GAUSSIAN, Kernel, WeightKind, WeightScheme
from .training import FittedPredictor, TrainingSet
from .vfr import VFRPredictor

__all__ = [
    "METHODS",
    "DEFAULT_GRID",
    "fit_method",
    "gmse",
    "CVConfig",
    "CVResult",
    "fold_assignment",
    "modifier_distance_scale",
    "select_bandwidth",
]

METHODS = ("gfr", "lfr", "pfr", "vfr")
DEFAULT_GRID = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)


def _default_kind(training: TrainingSet, weights) -> WeightKind:
    if not training.scalar_modifier:
        return WeightKind.METRIC_BALL
    if weights is None:
        return WeightKind.LOCAL_CONSTANT
    kind = WeightKind.parse(weights) if isinstance(weights, str) else WeightKind(weights)
    if kind is WeightKind.METRIC_BALL:
        raise ConfigurationError("metric_ball weights need a metric-space modifier")
    return kind


def fit_method(
    method: str,
    training: TrainingSet,
    bandwidth: float | None = None,
    weights: str | WeightKind | None = None,
    kernel: Kernel = GAUSSIAN,
    ridge: float | None = None,
    lfr_order: int = 1,
) -> FittedPredictor:
    """Build a predictor for ``method`` in {gfr, lfr, pfr, vfr}.

    ``weights`` selects local_constant or local_linear smoothing in a scalar
    modifier (vfr and pfr); metric modifiers always use metric_ball weights.
    """
    method = method.lower()
    if method == "gfr":
        return GFRPredictor(training, ridge)
    if bandwidth is None:
        raise ConfigurationError(f"{method} needs a bandwidth")
    if method == "lfr":
        return LFRPredictor(training, bandwidth, kernel, lfr_order)
    scheme = WeightScheme(_default_kind(training, weights), float(bandwidth), kernel)
    if method == "vfr":
        return VFRPredictor(training, scheme, ridge)
    if method == "pfr":
        return PFRPredictor(training, scheme, ridge)
    raise ConfigurationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def gmse(predictor: FittedPredictor, test: TrainingSet, threads: int = 1) -> float:
    """Mean squared response-space distance between predictions and ``test.Y``."""
    if test.response_space != predictor.training.response_space:
        raise ConfigurationError("test responses live in a different space than the training responses")
    pred = predictor.predict_batch(test.X, test.U, threads=threads)
    return float(np.mean(test.response_space.sq_distances(pred, test.Y)))


@dataclass(frozen=True)
class CVConfig:
    grid: tuple = DEFAULT_GRID
    k: int = 10
    seed: int = 0

    def __post_init__(self):
        g = tuple(float(h) for h in self.grid)
        if not g:
            raise ConfigurationError("bandwidth grid is empty")
        if any(h <= 0 for h in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigurationError("bandwidth grid must be positive and strictly increasing")
        if self.k < 2:
            raise ConfigurationError("need at least two folds")
        object.__setattr__(self, "grid", g)

    def scaled(self, factor: float) -> "CVConfig":
        return CVConfig(tuple(h * factor for h in self.grid), self.k, self.seed)


@dataclass(frozen=True, eq=False)
class CVResult:
    grid: np.ndarray
    errors: np.ndarray
    bandwidth: float
    folds: np.ndarray
    failures: np.ndarray = field(default=None)

    @property
    def best_error(self) -> float:
        return float(np.min(self.errors))


def fold_assignment(n: int, k: int, seed) -> np.ndarray:
    """Uniform random split into ``k`` folds of near-equal size."""
    if k > n:
        raise ConfigurationError(f"cannot split {n} observations into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    folds[perm] = np.arange(n) % k
    return folds


# standard deviation of |U - U'| for independent U, U' ~ Uniform(0, 1)
UNIT_PAIRWISE_SD = 1.0 / math.sqrt(18.0)


def modifier_distance_scale(training: TrainingSet) -> float:
    """Grid multiplier for a modifier on an arbitrary scale.

    The default grid is calibrated for a modifier spread like a standard
    uniform.  The multiplier is the standard deviation of the pairwise
    modifier distances relative to that of a standard uniform, so a
    Uniform(0, 1) modifier gets a factor close to one.
    """
    if training.scalar_modifier:
        U = training.U
        d = np.abs(U[:, None] - U[None, :])
    else:
        d = training.modifier_space.pairwise_distances(None, coords_a=training.u_coords)
    iu = np.triu_indices(training.n, 1)
    return float(np.std(d[iu])) / UNIT_PAIRWISE_SD


def select_bandwidth(
    training: TrainingSet,
    method: str,
    weights: str | WeightKind | None = None,
    config: CVConfig = CVConfig(),
    kernel: Kernel = GAUSSIAN,
    ridge: float | None = None,
    threads: int = 1,
) -> CVResult:
    """k-fold cross-validation over ``config.grid``.

    A bandwidth for which any fold cannot be evaluated (vanishing kernel
    weights, singular local design) gets an infinite error.  Ties go to the
    smaller bandwidth.
    """
    n = training.n
    folds = fold_assignment(n, config.k, config.seed)
    grid = np.asarray(config.grid, dtype=float)
    splits = [(np.flatnonzero(folds != f), np.flatnonzero(folds == f)) for f in range(config.k)]
    subsets = [(training.subset(tr), training.subset(te, check_size=False)) for tr, te in splits]

    def evaluate(job):
        h_idx, f = job
        train, test = subsets[f]
        try:
            model = fit_method(method, train, grid[h_idx], weights, kernel, ridge)
            return gmse(model, test)
        except NumericalError:
            return math.inf

    jobs = [(i, f) for i in range(len(grid)) for f in range(config.k)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, jobs))
    else:
        results = [evaluate(j) for j in jobs]
    fold_err = np.array(results, dtype=float).reshape(len(grid), config.k)
    failures = np.isinf(fold_err).sum(axis=1)
    errors = np.where(failures > 0, math.inf, fold_err.mean(axis=1))
    if not np.isfinite(errors).any():
        raise NoFeasibleBandwidthError(f"every bandwidth in the grid failed for {method}")
    best = int(np.argmin(errors))  # first minimum, i.e. the smallest h
    return CVResult(grid, errors, float(grid[best]), folds, failures)
