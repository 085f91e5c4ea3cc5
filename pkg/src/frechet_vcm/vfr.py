"""Frechet regression with coefficients that vary in a modifier.

A prediction at ``(x, u)`` is the weighted Frechet mean of the training
responses with the signed weights

    c_j = s_j/n + (x - xbar_u)^T Sigma_u^{-1} n^{-1} sum_i s_i (X_i - xbar_u)(delta_ij - s_j/n)

where ``s`` localises around ``u`` and ``xbar_u``, ``Sigma_u`` are the
locally weighted mean and covariance of ``X``.  For scalar responses this
is exactly the classical kernel varying-coefficient fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError, SingularDesignError
from .kernels import WeightKind, WeightScheme
from .metric_spaces import ScalarPoint, ScalarSpace
from .training import FittedPredictor, TrainingSet

__all__ = [
    "TrainingSet",
    "ConditionalMoments",
    "PredictionWeights",
    "VFRPredictor",
    "smoothing_weights",
    "conditional_moments",
    "cj_weights",
    "vfr_predict",
    "euclidean_vcm_predict",
    "DEFAULT_RIDGE_FACTOR",
]

DEFAULT_RIDGE_FACTOR = 1e-8
SINGULAR_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConditionalMoments:
    xbar_u: np.ndarray
    sigma_u: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class PredictionWeights:
    c: np.ndarray

    def __post_init__(self):
        if abs(float(np.sum(self.c)) - 1.0) > 1e-8:
            raise SingularDesignError(f"prediction weights sum to {np.sum(self.c)!r}, not one")


def _check_scheme(training: TrainingSet, scheme: WeightScheme) -> None:
    if training.scalar_modifier and scheme.kind is WeightKind.METRIC_BALL:
        raise ConfigurationError("metric_ball weights need a metric-space modifier")
    if not training.scalar_modifier and scheme.kind is not WeightKind.METRIC_BALL:
        raise ConfigurationError(
            f"a {training.modifier_space.name} modifier requires metric_ball weights, got {scheme.kind.value}"
        )


def smoothing_weights(training: TrainingSet, U_query, scheme: WeightScheme) -> np.ndarray:
    """Localisation weights ``s_in`` for each query modifier, shape ``(q, n)``."""
    _check_scheme(training, scheme)
    if training.scalar_modifier:
        return np.atleast_2d(scheme.weights(training.U, np.atleast_1d(np.asarray(U_query, dtype=float))))
    dist = training.modifier_space.pairwise_distances(U_query, coords_b=training.u_coords)
    return scheme.weights(dist)


def _local_moments(X: np.ndarray, W: np.ndarray, ridge):
    """Batched local means/covariances for weight rows ``W`` (mean one)."""
    n, p = X.shape
    S = W / n
    xbar = S @ X
    D = X[None, :, :] - xbar[:, None, :]
    sigma = np.einsum("qi,qij,qik->qjk", S, D, D)
    if p:
        if ridge is None:
            tr = np.trace(sigma, axis1=1, axis2=2)
            lam = DEFAULT_RIDGE_FACTOR * tr / p
        else:
            if ridge < 0:
                raise ConfigurationError("ridge must be nonnegative")
            lam = np.full(len(W), float(ridge))
        sigma = sigma + lam[:, None, None] * np.eye(p)
    return xbar, sigma, D


def _spd_solve(sigma: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``sigma a = rhs`` through a Cholesky factor, per batch entry."""
    q, p = rhs.shape
    if p == 0:
        return rhs.copy()
    lam = np.linalg.eigvalsh(sigma)
    scale = np.maximum(np.abs(lam).max(axis=1), np.finfo(float).tiny)
    bad = lam.min(axis=1) <= SINGULAR_TOL * scale
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise SingularDesignError("local covariance of X is singular", index=i)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        for i in range(q):
            try:
                np.linalg.cholesky(sigma[i])
            except np.linalg.LinAlgError:
                raise SingularDesignError("local covariance of X is not positive definite", index=i) from None
        raise
    z = np.linalg.solve(L, rhs[:, :, None])
    return np.linalg.solve(np.swapaxes(L, 1, 2), z)[:, :, 0]


def _cj_from_moments(W, xbar, sigma, D, Xq):
    n = W.shape[1]
    S = W / n
    a = _spd_solve(sigma, Xq - xbar)
    # n^{-1} sum_i s_i (X_i - xbar); zero up to rounding, kept for fidelity
    g = np.einsum("qi,qip->qp", S, D)
    proj = np.einsum("qip,qp->qi", D, a) - np.einsum("qp,qp->q", g, a)[:, None]
    return S + S * proj


def conditional_moments(training: TrainingSet, u, scheme: WeightScheme, ridge=None) -> ConditionalMoments:
    """Local mean ``xbar_u`` and covariance ``Sigma_u`` of ``X`` at ``u``."""
    Uq = np.asarray(u, dtype=float)[None]
    W = smoothing_weights(training, Uq, scheme)
    xbar, sigma, _ = _local_moments(training.X, W, ridge)
    return ConditionalMoments(xbar[0], sigma[0], W[0])


def cj_weights(training: TrainingSet, moments: ConditionalMoments, x) -> PredictionWeights:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    W = moments.weights[None]
    D = training.X[None] - moments.xbar_u[None, None, :]
    c = _cj_from_moments(W, moments.xbar_u[None], moments.sigma_u[None], D, x)
    return PredictionWeights(c[0])


@dataclass(frozen=True, eq=False)
class VFRPredictor(FittedPredictor):
    training: TrainingSet
    scheme: WeightScheme
    ridge: float | None = None

    method = "vfr"

    def __post_init__(self):
        _check_scheme(self.training, self.scheme)

    def prediction_weights(self, X, U) -> np.ndarray:
        t = self.training
        X = np.asarray(X, dtype=float).reshape(len(U), t.p)
        # moments are shared between queries with the same modifier value
        flat = np.asarray(U, dtype=float).reshape(len(U), -1)
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        Uu = uniq.reshape((len(uniq),) + np.shape(U)[1:])
        try:
            Wu = smoothing_weights(t, Uu, self.scheme)
        except NumericalError as exc:
            if exc.index is not None:
                exc.index = int(np.flatnonzero(inverse == exc.index)[0])
            raise
        xbar_u, sigma_u, _ = _local_moments(t.X, Wu, self.ridge)
        W, xbar, sigma = Wu[inverse], xbar_u[inverse], sigma_u[inverse]
        D = t.X[None, :, :] - xbar[:, None, :]
        return _cj_from_moments(W, xbar, sigma, D, X)


def vfr_predict(fitted: VFRPredictor, x, u):
    """Single VFR prediction as a point of the response space."""
    return fitted.predict(x, u)


def euclidean_vcm_predict(training: TrainingSet, x, u, scheme: WeightScheme, ridge=None) -> ScalarPoint:
    """Classical kernel varying-coefficient prediction ``b0(u) + x^T b(u)``.

    Written directly from the coefficient estimators (local covariance,
    local cross-covariance, intercept) rather than through prediction
    weights, so it serves as an independent check of the Frechet path.
    """
    if not isinstance(training.response_space, ScalarSpace):
        raise ConfigurationError("euclidean_vcm_predict needs scalar responses")
    s = smoothing_weights(training, np.asarray(u, dtype=float)[None], scheme)[0]
    X, Y = training.X, training.Y
    n, p = X.shape
    x = np.asarray(x, dtype=float).reshape(p)
    x_loc = sum(s[i] * X[i] for i in range(n)) / n
    y_loc = float(np.dot(s, Y)) / n
    cov = np.zeros((p, p))
    cross = np.zeros(p)
    for i in range(n):
        dx = X[i] - x_loc
        cov += s[i] * np.outer(dx, dx)
        cross += s[i] * dx * (Y[i] - y_loc)
    cov /= n
    cross /= n
    if p:
        lam = DEFAULT_RIDGE_FACTOR * np.trace(cov) / p if ridge is None else float(ridge)
        cov = cov + lam * np.eye(p)
        ev = np.linalg.eigvalsh(cov)
        if ev.min() <= SINGULAR_TOL * max(abs(ev).max(), np.finfo(float).tiny):
            raise SingularDesignError("local covariance of X is singular")
        beta = np.linalg.solve(cov, cross)
    else:
        beta = np.zeros(0)
    beta0 = y_loc - x_loc @ beta
    return ScalarPoint(beta0 + x @ beta)
