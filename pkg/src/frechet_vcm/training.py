"""Training data container and the predictor base class."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError, SingularDesignError, ValidationError
from .metric_spaces import MetricSpace, ScalarSpace

__all__ = ["TrainingSet", "FittedPredictor"]

# rows of prediction weights further than this from summing to one signal a
# numerically singular local design rather than a usable prediction
WEIGHT_DRIFT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Aligned records ``(X_i, U_i, Y_i)``.

    ``U`` is a float vector when ``modifier_space`` is scalar and a stack of
    metric objects otherwise.  Coordinates of ``Y`` (and of a metric ``U``)
    are computed once at construction.  ``check_size=False`` drops the
    ``n >= p + 2`` requirement, for held-out sets that are only predicted on.
    """

    X: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    response_space: MetricSpace
    modifier_space: MetricSpace = field(default_factory=ScalarSpace)
    check_size: bool = field(default=True, repr=False)
    y_coords: np.ndarray = field(init=False, repr=False)
    u_coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DimensionError(f"X must be a 2-d array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("predictors must be finite")
        U = self.modifier_space.validate(np.array(self.U, dtype=float))
        Y = self.response_space.validate(np.array(self.Y, dtype=float))
        n, p = X.shape
        if len(U) != n or len(Y) != n:
            raise DimensionError(f"X, U and Y lengths differ: {n}, {len(U)}, {len(Y)}")
        if self.check_size and n < p + 2:
            raise DimensionError(f"need at least p + 2 = {p + 2} observations, got {n}")
        for a in (X, U, Y):
            a.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "y_coords", self.response_space.coords(Y))
        object.__setattr__(self, "u_coords", self.modifier_space.coords(U))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def scalar_modifier(self) -> bool:
        return isinstance(self.modifier_space, ScalarSpace)

    def subset(self, idx, check_size: bool = True) -> "TrainingSet":
        idx = np.asarray(idx)
        return TrainingSet(self.X[idx], self.U[idx], self.Y[idx], self.response_space,
                           self.modifier_space, check_size)

    def __len__(self):
        return self.n


class FittedPredictor:
    """Memory-based predictor: every prediction is a weighted Frechet mean
    of the training responses with weights depending on the query."""

    method = "abstract"

    training: TrainingSet

    def prediction_weights(self, X, U) -> np.ndarray:
        """Weight matrix of shape ``(q, n)``; every row sums to one."""
        raise NotImplementedError

    def _coerce_queries(self, X, U):
        t = self.training
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, t.p) if t.p else np.zeros((len(np.atleast_1d(U)), 0))
        if X.shape[1] != t.p:
            raise DimensionError(f"expected {t.p} predictors, got {X.shape[1]}")
        U = t.modifier_space.validate(np.asarray(U, dtype=float))
        if len(U) != len(X):
            raise DimensionError("query X and U lengths differ")
        return X, U

    def predict_batch(self, X, U, threads: int = 1, chunk: int = 256) -> np.ndarray:
        """Predictions for many queries, returned as a stacked array."""
        X, U = self._coerce_queries(X, U)
        q = len(X)
        starts = list(range(0, q, chunk)) or [0]

        def run(s):
            try:
                W = self.prediction_weights(X[s:s + chunk], U[s:s + chunk])
                drift = ~(np.abs(W.sum(axis=1) - 1.0) <= WEIGHT_DRIFT_TOL)
                if drift.any():
                    i = int(np.flatnonzero(drift)[0])
                    raise SingularDesignError(
                        "prediction weights lost precision (ill-conditioned design)", index=i)
            except NumericalError as exc:
                if exc.index is not None:
                    exc.index += s
                raise
            return self.training.response_space.frechet_means(W, coords=self.training.y_coords)

        if threads > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(run, starts))
        else:
            parts = [run(s) for s in starts]
        return np.concatenate(parts, axis=0)

    def predict(self, x, u):
        """Single prediction as a point object of the response space."""
        x = np.asarray(x, dtype=float).reshape(1, -1) if self.training.p else np.zeros((1, 0))
        U = np.asarray(u, dtype=float)[None]
        return self.training.response_space.wrap(self.predict_batch(x, U)[0])
