"""Competing Frechet regressions: global (GFR), local (LFR) and
partially global (PFR).

All three are weighted Frechet means with weights summing to one, so they
share the mean solvers of :mod:`frechet_vcm.metric_spaces` and the batched
machinery of :class:`~frechet_vcm.training.FittedPredictor`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateNeighborhoodError,
    UnsupportedModifierError,
)
from .kernels import GAUSSIAN, Kernel, WeightKind, WeightScheme, _check_bandwidth, _normalise_rows, _shifted_kernel
from .training import FittedPredictor, TrainingSet
from .vfr import DEFAULT_RIDGE_FACTOR, _spd_solve, smoothing_weights

__all__ = [
    "BaselineKind",
    "GFRPredictor",
    "LFRPredictor",
    "PFRPredictor",
    "gfr_predict",
    "lfr_predict",
    "pfr_predict",
]


class BaselineKind:
    GFR = "gfr"
    LFR = "lfr"
    PFR = "pfr"
    ALL = ("gfr", "lfr", "pfr")


def _require_scalar_modifier(training: TrainingSet, method: str) -> None:
    if not training.scalar_modifier:
        raise UnsupportedModifierError(
            f"{method.upper()} cannot be applied with a {training.modifier_space.name} modifier"
        )


def _stack(X, U) -> np.ndarray:
    return np.column_stack([np.asarray(X, dtype=float), np.asarray(U, dtype=float).reshape(-1)])


def _ridged(cov: np.ndarray, ridge) -> np.ndarray:
    k = cov.shape[0]
    if k == 0:
        return cov
    lam = DEFAULT_RIDGE_FACTOR * np.trace(cov) / k if ridge is None else float(ridge)
    return cov + lam * np.eye(k)


@dataclass(frozen=True, eq=False)
class GFRPredictor(FittedPredictor):
    """Global Frechet regression on the stacked predictor ``z = (x, u)``.

    Weights ``(1 + (z - zbar)^T Sigma_Z^{-1} (Z_i - zbar)) / n``.
    """

    training: TrainingSet
    ridge: float | None = None
    _zbar: np.ndarray = field(init=False, repr=False)
    _cov: np.ndarray = field(init=False, repr=False)
    _Zc: np.ndarray = field(init=False, repr=False)

    method = "gfr"

    def __post_init__(self):
        _require_scalar_modifier(self.training, "gfr")
        Z = _stack(self.training.X, self.training.U)
        zbar = Z.mean(axis=0)
        Zc = Z - zbar
        cov = _ridged(Zc.T @ Zc / len(Z), self.ridge)
        object.__setattr__(self, "_zbar", zbar)
        object.__setattr__(self, "_cov", cov)
        object.__setattr__(self, "_Zc", Zc)

    def prediction_weights(self, X, U):
        z = _stack(X, U) - self._zbar
        a = _spd_solve(np.broadcast_to(self._cov, (len(z),) + self._cov.shape), z)
        n = self.training.n
        return (1.0 + a @ self._Zc.T) / n


@dataclass(frozen=True, eq=False)
class LFRPredictor(FittedPredictor):
    """Local Frechet regression on the stacked predictor ``Z = (X, U)``.

    Columns of ``Z`` are divided by their sample standard deviations and
    smoothed with a product Gaussian kernel; ``bandwidth`` is a scalar
    shared by all standardised coordinates or one value per column.
    ``order=1`` (default) gives the local linear weights

        s_i = K_i (1 - mu_1^T mu_2^{-1} (Z_i - z)) / (mu_0 - mu_1^T mu_2^{-1} mu_1),

    ``order=0`` the Nadaraya-Watson weights ``K_i / mean(K)``.
    """

    training: TrainingSet
    bandwidth: float | tuple = 0.1
    kernel: Kernel = GAUSSIAN
    order: int = 1
    _h: np.ndarray = field(init=False, repr=False)
    _sd: np.ndarray = field(init=False, repr=False)

    method = "lfr"

    def __post_init__(self):
        _require_scalar_modifier(self.training, "lfr")
        if self.order not in (0, 1):
            raise ConfigurationError("LFR order must be 0 or 1")
        k = self.training.p + 1
        h = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (k,)).copy()
        for v in h:
            _check_bandwidth(v)
        sd = _stack(self.training.X, self.training.U).std(axis=0)
        sd[sd == 0] = 1.0
        object.__setattr__(self, "_h", h)
        object.__setattr__(self, "_sd", sd)

    def prediction_weights(self, X, U):
        Zt = _stack(self.training.X, self.training.U) / self._sd
        Zq = _stack(X, U) / self._sd
        D = Zt[None, :, :] - Zq[:, None, :]
        logk = self.kernel.log_evaluate(D / self._h).sum(axis=2) - np.log(self._h).sum()
        K = _normalise_rows(_shifted_kernel(logk))
        n = K.shape[1]
        if self.order == 0:
            return K / n
        mu0 = K.mean(axis=1)
        mu1 = np.einsum("qi,qik->qk", K, D) / n
        mu2 = np.einsum("qi,qij,qik->qjk", K, D, D) / n
        b = _spd_solve(mu2, mu1)
        denom = mu0 - np.einsum("qk,qk->q", mu1, b)
        bad = ~(denom > 1e-12 * mu0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DegenerateNeighborhoodError("local linear design is degenerate", index=i)
        S = K * (1.0 - np.einsum("qik,qk->qi", D, b)) / denom[:, None]
        # rows sum to n exactly; rescale to remove drift from an ill-conditioned mu_2
        return S / S.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class PFRPredictor(FittedPredictor):
    """Partially global Frechet regression: a common linear effect of ``X``
    plus a nonparametric effect of ``U``.

    Follows the partially linear (double residual) construction.  With
    ``L`` the localisation smoother evaluated at the training modifiers,
    ``Xt = X - L X`` and ``G = Xt^T Xt / n``, the weights at ``(x, u)`` are

        p = s(u)/n + (x - s(u) X / n)^T G^{-1} Xt^T (I - L) / n,

    which sum to one because the rows of ``L`` do.  For scalar responses
    the prediction is ``m_Y(u) + (x - m_X(u))^T beta``.
    """

    training: TrainingSet
    scheme: WeightScheme
    ridge: float | None = None
    _G: np.ndarray = field(init=False, repr=False)
    _B: np.ndarray = field(init=False, repr=False)

    method = "pfr"

    def __post_init__(self):
        t = self.training
        if t.scalar_modifier and self.scheme.kind is WeightKind.METRIC_BALL:
            raise ConfigurationError("metric_ball weights need a metric-space modifier")
        if not t.scalar_modifier and self.scheme.kind is not WeightKind.METRIC_BALL:
            raise ConfigurationError("a metric modifier requires metric_ball weights")
        L = smoothing_weights(t, t.U, self.scheme) / t.n
        Xt = t.X - L @ t.X
        G = _ridged(Xt.T @ Xt / t.n, self.ridge)
        B = Xt.T @ (np.eye(t.n) - L) / t.n
        object.__setattr__(self, "_G", G)
        object.__setattr__(self, "_B", B)

    def prediction_weights(self, X, U):
        t = self.training
        S = smoothing_weights(t, U, self.scheme) / t.n
        d = np.asarray(X, dtype=float).reshape(len(S), t.p) - S @ t.X
        a = _spd_solve(np.broadcast_to(self._G, (len(S),) + self._G.shape), d)
        return S + a @ self._B


def gfr_predict(training: TrainingSet, x, u, ridge=None):
    return GFRPredictor(training, ridge).predict(x, u)


def lfr_predict(training: TrainingSet, x, u, bandwidth, kernel: Kernel = GAUSSIAN, order: int = 1):
    return LFRPredictor(training, bandwidth, kernel, order).predict(x, u)


def pfr_predict(training: TrainingSet, x, u, bandwidth: float, kernel: Kernel = GAUSSIAN, ridge=None):
    kind = WeightKind.LOCAL_CONSTANT if training.scalar_modifier else WeightKind.METRIC_BALL
    return PFRPredictor(training, WeightScheme(kind, bandwidth, kernel), ridge).predict(x, u)
