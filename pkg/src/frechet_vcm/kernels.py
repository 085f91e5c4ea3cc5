"""Smoothing kernels and localisation weights.

Three weight schemes are provided, all normalised so that the weights
average to one over the sample:

* local constant (Nadaraya-Watson) on a scalar modifier,
* local linear on a scalar modifier (weights may be negative),
* metric ball, i.e. kernel weights of precomputed distances, for a modifier
  living in a general metric space.

Every function accepts either a single query (returns shape ``(n,)``) or a
vector of queries (returns shape ``(q, n)``, one row per query).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateNeighborhoodError, InvalidBandwidthError, ConfigurationError

__all__ = [
    "KernelKind",
    "Kernel",
    "GAUSSIAN",
    "WeightKind",
    "WeightScheme",
    "kernel_eval",
    "local_constant_weights",
    "local_linear_weights",
    "metric_ball_weights",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
# relative floor below which a normaliser counts as zero
DEGENERACY_TOL = 1e-12


class KernelKind(str, Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Kernel:
    """A symmetric probability density used for smoothing."""

    kind: KernelKind = KernelKind.GAUSSIAN

    def evaluate(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind is KernelKind.GAUSSIAN:
            return _INV_SQRT_2PI * np.exp(-0.5 * v * v)
        raise ConfigurationError(f"unknown kernel {self.kind!r}")

    def log_evaluate(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind is KernelKind.GAUSSIAN:
            return np.log(_INV_SQRT_2PI) - 0.5 * v * v
        raise ConfigurationError(f"unknown kernel {self.kind!r}")

    @classmethod
    def from_name(cls, name: str) -> "Kernel":
        try:
            return cls(KernelKind(name))
        except ValueError:
            raise ConfigurationError(f"unknown kernel {name!r}") from None


GAUSSIAN = Kernel()


def _check_bandwidth(h) -> float:
    h = float(h)
    if not (h > 0 and np.isfinite(h)):
        raise InvalidBandwidthError(f"bandwidth must be positive and finite, got {h}")
    return h


def kernel_eval(kernel: Kernel, v, h):
    """Scaled kernel ``K_h(v) = K(v / h) / h``."""
    h = _check_bandwidth(h)
    out = kernel.evaluate(np.asarray(v, dtype=float) / h) / h
    return float(out) if np.ndim(out) == 0 else out


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def _normalise_rows(k: np.ndarray) -> np.ndarray:
    denom = k.mean(axis=1)
    scale = k.max(axis=1)
    bad = ~(denom > DEGENERACY_TOL * scale) | ~np.isfinite(denom)
    if bad.any():
        i = _first_bad(bad)
        raise DegenerateNeighborhoodError(
            "kernel weights vanish: no observation inside the bandwidth", index=i
        )
    return k / denom[:, None]


def _shifted_kernel(logk: np.ndarray) -> np.ndarray:
    """Kernel rows rescaled so the largest entry is one.

    All weight schemes are invariant to a positive rescaling of a row, and
    working from the log-kernel keeps full relative precision where the raw
    values would be subnormal.  Rows whose raw values all underflow still
    count as degenerate.
    """
    top = logk.max(axis=1)
    bad = ~(np.exp(top) > 0) | ~np.isfinite(top)
    if bad.any():
        i = _first_bad(bad)
        raise DegenerateNeighborhoodError(
            "kernel weights vanish: no observation inside the bandwidth", index=i
        )
    return np.exp(logk - top[:, None])


def _as_queries(u) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=float)
    return np.atleast_1d(u), u.ndim == 0


def local_constant_weights(U, u, kernel: Kernel = GAUSSIAN, h: float = 1.0) -> np.ndarray:
    """Nadaraya-Watson weights ``K_h(U_i - u) / mean_j K_h(U_j - u)``."""
    h = _check_bandwidth(h)
    U = np.asarray(U, dtype=float).ravel()
    if U.size == 0:
        raise ConfigurationError("need at least one observation")
    uq, single = _as_queries(u)
    k = _shifted_kernel(kernel.log_evaluate((U[None, :] - uq[:, None]) / h) - np.log(h))
    w = _normalise_rows(k)
    return w[0] if single else w


def local_linear_weights(U, u, kernel: Kernel = GAUSSIAN, h: float = 1.0) -> np.ndarray:
    """Local linear weights built from the kernel moments mu_0, mu_1, mu_2.

    The result satisfies ``mean(s) == 1`` and ``mean(s * (U - u)) == 0``.
    """
    h = _check_bandwidth(h)
    U = np.asarray(U, dtype=float).ravel()
    if U.size < 2:
        raise ConfigurationError("local linear weights need at least two observations")
    uq, single = _as_queries(u)
    d = U[None, :] - uq[:, None]
    k = _shifted_kernel(kernel.log_evaluate(d / h) - np.log(h))
    # centred form of k (mu2 - mu1 d) / (mu0 mu2 - mu1^2); the raw moment
    # difference cancels badly when one point carries nearly all the mass
    pk = k / k.sum(axis=1, keepdims=True)
    dbar = (pk * d).sum(axis=1)
    e = d - dbar[:, None]
    e -= (pk * e).sum(axis=1)[:, None]
    var = (pk * e * e).sum(axis=1)
    second = (pk * d * d).sum(axis=1)
    bad = ~(var > DEGENERACY_TOL * second) | ~np.isfinite(var)
    if bad.any():
        i = _first_bad(bad)
        raise DegenerateNeighborhoodError(
            "local linear design is degenerate", index=i
        )
    w = U.size * pk * (1.0 - dbar[:, None] * e / var[:, None])
    return w[0] if single else w


def metric_ball_weights(distances, kernel: Kernel = GAUSSIAN, h: float = 1.0) -> np.ndarray:
    """Kernel weights of distances ``delta(U_i, u)``, normalised to mean one."""
    h = _check_bandwidth(h)
    dist = np.asarray(distances, dtype=float)
    single = dist.ndim == 1
    dist = np.atleast_2d(dist)
    if dist.shape[1] == 0:
        raise ConfigurationError("need at least one observation")
    if np.any(dist < 0):
        raise ConfigurationError("distances must be nonnegative")
    k = _shifted_kernel(kernel.log_evaluate(dist / h) - np.log(h))
    w = _normalise_rows(k)
    return w[0] if single else w


class WeightKind(str, Enum):
    LOCAL_CONSTANT = "local_constant"
    LOCAL_LINEAR = "local_linear"
    METRIC_BALL = "metric_ball"

    @classmethod
    def parse(cls, name: str) -> "WeightKind":
        aliases = {"constant": cls.LOCAL_CONSTANT, "linear": cls.LOCAL_LINEAR,
                   "ball": cls.METRIC_BALL, "metric": cls.METRIC_BALL}
        if name in aliases:
            return aliases[name]
        try:
            return cls(name)
        except ValueError:
            raise ConfigurationError(f"unknown weight scheme {name!r}") from None


@dataclass(frozen=True)
class WeightScheme:
    kind: WeightKind
    bandwidth: float
    kernel: Kernel = GAUSSIAN

    def __post_init__(self):
        _check_bandwidth(self.bandwidth)

    def weights(self, U, u=None) -> np.ndarray:
        """Weights for scalar positions ``U`` at ``u``, or for a distance
        matrix ``U`` when the scheme is metric_ball (``u`` ignored)."""
        if self.kind is WeightKind.LOCAL_CONSTANT:
            return local_constant_weights(U, u, self.kernel, self.bandwidth)
        if self.kind is WeightKind.LOCAL_LINEAR:
            return local_linear_weights(U, u, self.kernel, self.bandwidth)
        return metric_ball_weights(U, self.kernel, self.bandwidth)
