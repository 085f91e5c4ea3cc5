"""Response spaces: scalars, distributions (2-Wasserstein) and SPD matrices.

All three spaces embed isometrically (up to a constant factor) into a
Euclidean coordinate space:

=========  =======================  ======================  =================
space      coordinates              squared distance        feasible set
=========  =======================  ======================  =================
scalar     the value                ``(a - b)**2``          everything
quantile   quantile values on grid  ``mean((a - b)**2)``    nondecreasing
spd        flattened ``P**(1/2)``   ``||A - B||_F**2``      PSD square roots
=========  =======================  ======================  =================

A weighted Frechet mean with (possibly negative) weights summing to one is
therefore the weighted average of the coordinates followed by the
Euclidean projection onto the feasible set.  Batched versions of every
operation work on stacked arrays, one row per object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import _accel
from .errors import (
    DimensionError,
    GridMismatchError,
    InvalidMatrixError,
    InvalidWeightsError,
    ValidationError,
)

__all__ = [
    "quantile_grid",
    "QuantileFunction",
    "SPDPoint",
    "ScalarPoint",
    "MetricSpace",
    "ScalarSpace",
    "QuantileSpace",
    "SPDSpace",
    "space_from_name",
    "wasserstein_sq_distance",
    "matrix_sqrt",
    "cholesky_sq_distance",
    "scalar_weighted_mean",
    "quantile_weighted_mean",
    "spd_weighted_mean",
    "isotonic_projection",
]

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10
WEIGHT_SUM_TOL = 1e-8


def quantile_grid(m: int) -> np.ndarray:
    """Interior midpoint grid ``t_i = (2i - 1) / (2m)``, i = 1..m."""
    if m < 1:
        raise ValueError("grid size must be positive")
    return (2.0 * np.arange(1, m + 1) - 1.0) / (2.0 * m)


# --------------------------------------------------------------------------
# point types


@dataclass(frozen=True, eq=False)
class QuantileFunction:
    """A distribution stored as quantiles on the interior midpoint grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValidationError("quantile values must be finite and nonempty")
        if np.any(np.diff(v) < 0):
            raise ValidationError("quantile values must be nondecreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return quantile_grid(self.m)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True, eq=False)
class SPDPoint:
    """Symmetric positive semi-definite matrix with its square root cached."""

    matrix: np.ndarray
    sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidMatrixError(f"expected a square matrix, got shape {a.shape}")
        root = _sqrt_stack(a[None])[0]
        a.setflags(write=False)
        root.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "sqrt", root)

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class ScalarPoint:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not np.isfinite(v):
            raise ValidationError("scalar response must be finite")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.value, dtype=dtype)


# --------------------------------------------------------------------------
# primitives


def isotonic_projection(raw) -> np.ndarray:
    """Euclidean projection of each row onto the nondecreasing cone (PAVA).

    Accepts a vector or a 2-d array of row vectors.
    """
    raw = np.asarray(raw, dtype=float)
    single = raw.ndim == 1
    out = _accel.pava_rows(np.atleast_2d(raw))
    # block means may differ from the exact ordering by an ulp
    out = np.maximum.accumulate(out, axis=1)
    return out[0] if single else out


def _check_symmetric(a: np.ndarray) -> None:
    scale = np.max(np.abs(a), axis=(-2, -1))
    asym = np.max(np.abs(a - np.swapaxes(a, -1, -2)), axis=(-2, -1))
    bad = asym > SYMMETRY_TOL * np.maximum(scale, 1.0)
    if np.any(bad):
        i = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise InvalidMatrixError(f"matrix {i} is not symmetric (asymmetry {np.atleast_1d(asym)[i]:.3g})")


def _sqrt_stack(a: np.ndarray, check_psd: bool = True) -> np.ndarray:
    """Symmetric square roots of a stack ``(k, M, M)`` via eigendecomposition."""
    if a.shape[0] == 0:
        return a.copy()
    _check_symmetric(a)
    sym = 0.5 * (a + np.swapaxes(a, -1, -2))
    lam, vec = np.linalg.eigh(sym)
    if check_psd:
        trace_scale = np.maximum(np.abs(np.trace(sym, axis1=-2, axis2=-1)), 1.0)
        bad = lam.min(axis=-1) < -PSD_TOL * trace_scale
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise InvalidMatrixError(f"matrix {i} is not positive semi-definite (min eigenvalue {lam[i].min():.3g})")
    root = np.sqrt(np.clip(lam, 0.0, None))
    return np.einsum("...ij,...j,...kj->...ik", vec, root, vec)


def matrix_sqrt(P) -> np.ndarray:
    """Symmetric PSD square root ``V diag(sqrt(max(lambda, 0))) V^T``."""
    if isinstance(P, SPDPoint):
        return np.array(P.sqrt)
    a = np.asarray(P, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise InvalidMatrixError(f"expected square matrices, got shape {a.shape}")
    if a.ndim == 2:
        return _sqrt_stack(a[None])[0]
    return _sqrt_stack(a)


def _values(q) -> np.ndarray:
    return np.asarray(q.values if isinstance(q, QuantileFunction) else q, dtype=float)


def wasserstein_sq_distance(a, b) -> float:
    """Discretised squared 2-Wasserstein distance ``mean((a - b)**2)``."""
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise GridMismatchError(f"quantile grids differ: {va.shape[-1]} vs {vb.shape[-1]}")
    return float(np.mean((va - vb) ** 2))


def cholesky_sq_distance(a, b) -> float:
    """Squared Frobenius distance between symmetric square roots."""
    ra, rb = matrix_sqrt(a), matrix_sqrt(b)
    if ra.shape != rb.shape:
        raise DimensionError(f"matrix dimensions differ: {ra.shape} vs {rb.shape}")
    d = ra - rb
    return float(np.sum(d * d))


def _check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape[-1] != n:
        raise InvalidWeightsError(f"expected {n} weights, got {w.shape[-1]}")
    if not np.all(np.isfinite(w)):
        raise InvalidWeightsError("weights must be finite")
    off = np.abs(w.sum(axis=-1) - 1.0)
    if np.any(off > WEIGHT_SUM_TOL):
        raise InvalidWeightsError(f"weights must sum to one (off by {np.max(off):.3g})")
    return w


def scalar_weighted_mean(points, weights) -> ScalarPoint:
    """Minimiser of ``sum_j w_j (Y_j - y)**2`` for weights summing to one."""
    y = np.array([float(p) for p in points], dtype=float)
    w = _check_weights(weights, y.size)
    return ScalarPoint(float(w @ y))


def quantile_weighted_mean(points, weights) -> QuantileFunction:
    """Weighted Wasserstein barycenter with signed weights.

    The weighted average of the quantile vectors is projected onto the
    monotone cone; the projection is a no-op when the weights are nonnegative.
    """
    Y = np.array([_values(p) for p in points], dtype=float)
    if Y.ndim != 2:
        raise GridMismatchError("all quantile functions must share one grid")
    w = _check_weights(weights, Y.shape[0])
    return QuantileFunction(isotonic_projection(w @ Y))


def spd_weighted_mean(points, weights) -> SPDPoint:
    """Weighted mean under the square-root metric with signed weights."""
    roots = [matrix_sqrt(p) for p in points]
    if len({r.shape for r in roots}) != 1:
        raise DimensionError("all matrices must have the same dimension")
    R = np.array(roots)
    w = _check_weights(weights, R.shape[0])
    proj = _project_psd(np.tensordot(w, R, axes=1)[None])[0]
    return SPDPoint(proj @ proj)


def _project_psd(R: np.ndarray) -> np.ndarray:
    sym = 0.5 * (R + np.swapaxes(R, -1, -2))
    lam, vec = np.linalg.eigh(sym)
    return np.einsum("...ij,...j,...kj->...ik", vec, np.clip(lam, 0.0, None), vec)


# --------------------------------------------------------------------------
# spaces


class MetricSpace:
    """Interface shared by the response (and modifier) spaces.

    Subclasses define ``coords`` (the linear embedding), ``scale`` (so that
    ``d^2 = scale * ||coords(a) - coords(b)||^2``), ``project`` (projection
    of coordinates onto the feasible set) and ``from_coords``.
    """

    name = "abstract"
    scale = 1.0

    # --- subclass hooks
    def validate(self, points) -> np.ndarray:
        raise NotImplementedError

    def coords(self, points) -> np.ndarray:
        raise NotImplementedError

    def project(self, raw: np.ndarray) -> np.ndarray:
        return raw

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def wrap(self, point):
        raise NotImplementedError

    # --- derived operations
    def squared_distance(self, a, b) -> float:
        ca = self.coords(self.validate(np.asarray(a, dtype=float)[None]))
        cb = self.coords(self.validate(np.asarray(b, dtype=float)[None]))
        if ca.shape != cb.shape:
            raise DimensionError("points live in different spaces")
        return float(self.scale * np.sum((ca - cb) ** 2))

    def sq_distances(self, A, B) -> np.ndarray:
        """Row-wise squared distances between two stacks of equal length."""
        ca, cb = self.coords(A), self.coords(B)
        if ca.shape != cb.shape:
            raise DimensionError(f"shape mismatch {ca.shape} vs {cb.shape}")
        return self.scale * np.sum((ca - cb) ** 2, axis=1)

    def pairwise_distances(self, A, B=None, coords_a=None, coords_b=None) -> np.ndarray:
        ca = self.coords(A) if coords_a is None else coords_a
        cb = ca if B is None and coords_b is None else (self.coords(B) if coords_b is None else coords_b)
        return np.sqrt(self.scale) * cdist(ca, cb)

    def frechet_means(self, W, points=None, coords=None) -> np.ndarray:
        """Weighted Frechet means, one per row of ``W`` (rows sum to one)."""
        C = self.coords(points) if coords is None else coords
        W = _check_weights(np.atleast_2d(W), C.shape[0])
        return self.from_coords(self.project(W @ C))

    def weighted_frechet_mean(self, points, weights):
        P = self.validate(np.asarray(points, dtype=float))
        return self.wrap(self.frechet_means(np.asarray(weights, dtype=float)[None], P)[0])


class ScalarSpace(MetricSpace):
    name = "scalar"

    def validate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1)
        if not np.all(np.isfinite(p)):
            raise ValidationError("scalar values must be finite")
        return p

    def coords(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float).reshape(-1, 1)

    def from_coords(self, c):
        return c[:, 0]

    def wrap(self, point):
        return ScalarPoint(float(point))

    @property
    def point_shape(self):
        return ()

    def __repr__(self):
        return "ScalarSpace()"

    def __eq__(self, other):
        return isinstance(other, ScalarSpace)

    def __hash__(self):
        return hash("scalar")


class QuantileSpace(MetricSpace):
    name = "quantile"

    def __init__(self, m: int = 20):
        if m < 1:
            raise ValueError("grid size must be positive")
        self.m = int(m)
        self.scale = 1.0 / self.m

    @property
    def grid(self):
        return quantile_grid(self.m)

    @property
    def point_shape(self):
        return (self.m,)

    def validate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        if p.ndim != 2 or p.shape[1] != self.m:
            raise GridMismatchError(f"expected quantile rows of length {self.m}, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("quantile values must be finite")
        bad = np.any(np.diff(p, axis=1) < 0, axis=1)
        if bad.any():
            raise ValidationError(f"quantile row {int(np.flatnonzero(bad)[0])} is decreasing")
        return p

    def coords(self, points):
        p = np.asarray(points, dtype=float)
        if p.ndim != 2 or p.shape[1] != self.m:
            raise GridMismatchError(f"expected quantile rows of length {self.m}, got shape {p.shape}")
        return p

    def project(self, raw):
        return isotonic_projection(raw)

    def from_coords(self, c):
        return c

    def wrap(self, point):
        return QuantileFunction(point)

    def __repr__(self):
        return f"QuantileSpace(m={self.m})"

    def __eq__(self, other):
        return isinstance(other, QuantileSpace) and other.m == self.m

    def __hash__(self):
        return hash(("quantile", self.m))


class SPDSpace(MetricSpace):
    name = "spd"

    def __init__(self, M: int = 2):
        if M < 1:
            raise ValueError("matrix dimension must be positive")
        self.M = int(M)

    @property
    def point_shape(self):
        return (self.M, self.M)

    def _shape(self, p):
        if p.ndim != 3 or p.shape[1:] != (self.M, self.M):
            raise DimensionError(f"expected {self.M}x{self.M} matrices, got shape {p.shape}")

    def validate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        self._shape(p)
        if not np.all(np.isfinite(p)):
            raise ValidationError("matrix entries must be finite")
        _sqrt_stack(p)  # symmetric and PSD checks
        return p

    def coords(self, points):
        p = np.asarray(points, dtype=float)
        self._shape(p)
        return _sqrt_stack(p).reshape(p.shape[0], self.M * self.M)

    def project(self, raw):
        R = raw.reshape(-1, self.M, self.M)
        return _project_psd(R).reshape(raw.shape[0], -1)

    def from_coords(self, c):
        R = c.reshape(-1, self.M, self.M)
        return R @ R

    def wrap(self, point):
        return SPDPoint(point)

    def __repr__(self):
        return f"SPDSpace(M={self.M})"

    def __eq__(self, other):
        return isinstance(other, SPDSpace) and other.M == self.M

    def __hash__(self):
        return hash(("spd", self.M))


def space_from_name(name: str, m: int = 20, M: int = 2) -> MetricSpace:
    if name == "scalar":
        return ScalarSpace()
    if name == "quantile":
        return QuantileSpace(m)
    if name == "spd":
        return SPDSpace(M)
    raise ValidationError(f"unknown space {name!r} (expected scalar, quantile or spd)")
