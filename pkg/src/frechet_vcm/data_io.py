"""CSV datasets, histogram conversion and JSON model persistence.

Dataset files are UTF-8, comma separated, with a mandatory header:

* predictors ``x1..xp``;
* modifier ``u`` (scalar), ``u_q1..u_qm`` (quantile function) or
  ``u_m11..u_mMM`` (SPD matrix flattened row-major);
* response ``y``, ``y_q1..y_qm`` or ``y_m11..y_mMM`` in the same way.

Numbers are written with ``repr``, the shortest string that reads back to
the same double, so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import contextlib
import csv
import json
import math
import re
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    FrechetVCMError,
    ParseError,
    UnsupportedVersionError,
    ValidationError,
)
from .kernels import Kernel, WeightKind, WeightScheme
from .metric_spaces import MetricSpace, QuantileFunction, quantile_grid, space_from_name
from .training import FittedPredictor, TrainingSet

__all__ = [
    "FORMAT_TAG",
    "DatasetSchema",
    "DatasetTable",
    "HistogramRecord",
    "read_table",
    "read_dataset",
    "write_dataset",
    "write_points",
    "histogram_to_quantile",
    "read_histograms",
    "write_results",
    "write_model",
    "model_to_dict",
    "model_from_dict",
    "load_model",
]

FORMAT_NAME = "frechet-vcm"
FORMAT_VERSION = 1
FORMAT_TAG = f"{FORMAT_NAME}/{FORMAT_VERSION}"

_TYPES = ("scalar", "quantile", "spd")


def _fmt(v: float) -> str:
    return repr(float(v))


def point_columns(prefix: str, kind: str, dim: int) -> list[str]:
    """Column names of one metric object: ``y``, ``y_q1..`` or ``y_m11..``."""
    if kind == "scalar":
        return [prefix]
    if kind == "quantile":
        return [f"{prefix}_q{i}" for i in range(1, dim + 1)]
    if kind == "spd":
        return [f"{prefix}_m{i}{j}" for i in range(1, dim + 1) for j in range(1, dim + 1)]
    raise ValidationError(f"unknown object type {kind!r} (expected one of {', '.join(_TYPES)})")


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of a dataset file.

    ``response_dim`` / ``modifier_dim`` is the grid size ``m`` for quantile
    objects, the matrix size ``M`` for SPD objects and 1 for scalars.
    """

    response_type: str
    p: int
    modifier_type: str = "scalar"
    response_dim: int = 1
    modifier_dim: int = 1

    def __post_init__(self):
        for kind in (self.response_type, self.modifier_type):
            if kind not in _TYPES:
                raise ValidationError(f"unknown object type {kind!r} (expected one of {', '.join(_TYPES)})")
        if self.p < 0:
            raise ValidationError("predictor count must be nonnegative")
        if self.response_type == "scalar":
            object.__setattr__(self, "response_dim", 1)
        if self.modifier_type == "scalar":
            object.__setattr__(self, "modifier_dim", 1)
        if self.response_dim < 1 or self.modifier_dim < 1:
            raise ValidationError("object dimensions must be positive")

    @classmethod
    def build(cls, response_type: str, p: int, modifier_type: str = "scalar",
              m: int = 20, M: int = 2, modifier_m: int | None = None, modifier_M: int | None = None):
        """Schema from the usual ``m`` / ``M`` parameters."""
        def dim(kind, mm, MM):
            return {"scalar": 1, "quantile": mm, "spd": MM}.get(kind, 1)
        return cls(response_type, p, modifier_type, dim(response_type, m, M),
                   dim(modifier_type, modifier_m or m, modifier_M or M))

    @property
    def response_space(self) -> MetricSpace:
        return space_from_name(self.response_type, self.response_dim, self.response_dim)

    @property
    def modifier_space(self) -> MetricSpace:
        return space_from_name(self.modifier_type, self.modifier_dim, self.modifier_dim)

    def x_columns(self) -> list[str]:
        return [f"x{j}" for j in range(1, self.p + 1)]

    def u_columns(self) -> list[str]:
        return point_columns("u", self.modifier_type, self.modifier_dim)

    def y_columns(self) -> list[str]:
        return point_columns("y", self.response_type, self.response_dim)

    def header(self, with_response: bool = True) -> list[str]:
        cols = self.x_columns() + self.u_columns()
        return cols + self.y_columns() if with_response else cols

    @classmethod
    def from_header(cls, header) -> "DatasetSchema":
        """Infer the layout from column names alone."""
        header = [h.strip() for h in header]
        xs = [h for h in header if re.fullmatch(r"x\d+", h)]

        def detect(prefix):
            if prefix in header:
                return "scalar", 1
            q = [h for h in header if re.fullmatch(rf"{prefix}_q\d+", h)]
            if q:
                return "quantile", len(q)
            mat = [h for h in header if re.fullmatch(rf"{prefix}_m\d+", h)]
            if mat:
                M = math.isqrt(len(mat))
                if M * M != len(mat):
                    raise ParseError(f"{len(mat)} {prefix}_m columns do not form a square matrix")
                return "spd", M
            return None, 0

        u_kind, u_dim = detect("u")
        if u_kind is None:
            raise ParseError("header has no modifier column (u, u_q1.. or u_m11..)")
        y_kind, y_dim = detect("y")
        schema = cls(y_kind or "scalar", len(xs), u_kind, y_dim or 1, u_dim)
        expected = schema.header(with_response=y_kind is not None)
        if header != expected:
            raise ParseError(f"unexpected header; expected columns {','.join(expected)}")
        return schema

    def to_dict(self) -> dict:
        return {"response_type": self.response_type, "p": self.p, "modifier_type": self.modifier_type,
                "response_dim": self.response_dim, "modifier_dim": self.modifier_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            return cls(str(d["response_type"]), int(d["p"]), str(d["modifier_type"]),
                       int(d["response_dim"]), int(d["modifier_dim"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid schema block: {exc}") from None


@dataclass(frozen=True, eq=False)
class DatasetTable:
    """Parsed dataset; ``Y`` is None for files without response columns."""

    X: np.ndarray
    U: np.ndarray
    Y: np.ndarray | None
    schema: DatasetSchema

    def training_set(self) -> TrainingSet:
        if self.Y is None:
            raise ValidationError("dataset has no response columns")
        return TrainingSet(self.X, self.U, self.Y, self.schema.response_space, self.schema.modifier_space)


# --------------------------------------------------------------------------
# file helpers


@contextlib.contextmanager
def _open_in(path):
    if str(path) == "-":
        yield sys.stdin
        return
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        yield fh


@contextlib.contextmanager
def _open_out(path):
    if str(path) == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc.strerror}") from None
    with fh:
        yield fh


def _to_objects(block: np.ndarray, kind: str, dim: int) -> np.ndarray:
    if kind == "scalar":
        return block[:, 0]
    if kind == "spd":
        return block.reshape(-1, dim, dim)
    return block


def _flatten(points, kind: str) -> np.ndarray:
    a = np.asarray(points, dtype=float)
    if kind == "scalar":
        return a.reshape(-1, 1)
    return a.reshape(a.shape[0], -1)


def _check_rows(space: MetricSpace, objects: np.ndarray, lines: list[int], path, what: str) -> None:
    """Validate row by row so the error can name the offending line."""
    try:
        space.validate(objects)
        return
    except FrechetVCMError:
        pass
    for i, line in enumerate(lines):
        try:
            space.validate(objects[i:i + 1])
        except FrechetVCMError as exc:
            raise ValidationError(f"{path}, line {line}: {what} {exc}") from None


def read_table(path, schema: DatasetSchema | None = None, require_response: bool = True) -> DatasetTable:
    """Parse a dataset file.

    The layout is inferred from the header; when ``schema`` is given the
    header must match it (with or without the response columns, unless
    ``require_response`` is set).
    """
    with _open_in(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, a header line is required") from None
        except csv.Error as exc:
            raise ParseError(f"{path}, line 1: {exc}") from None
        found = DatasetSchema.from_header(header)
        has_y = any(h.strip().startswith("y") for h in header)
        if schema is not None:
            cmp = found if has_y else DatasetSchema(schema.response_type, found.p, found.modifier_type,
                                                    schema.response_dim, found.modifier_dim)
            if cmp != schema:
                raise ParseError(
                    f"{path}: header does not match the declared layout; expected columns "
                    f"{','.join(schema.header(with_response=has_y))}"
                )
            found = schema
        if require_response and not has_y:
            raise ParseError(f"{path}: response columns are missing")
        width = len(header)
        rows, lines = [], []
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != width:
                    raise ParseError(f"{path}, line {line}: expected {width} fields, got {len(row)}")
                try:
                    vals = [float(c) for c in row]
                except ValueError:
                    bad = next(c for c in row if not _is_float(c))
                    raise ParseError(f"{path}, line {line}: cannot parse {bad!r} as a number") from None
                if not all(math.isfinite(v) for v in vals):
                    raise ValidationError(f"{path}, line {line}: non-finite value")
                rows.append(vals)
                lines.append(line)
        except csv.Error as exc:
            raise ParseError(f"{path}, line {reader.line_num}: {exc}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    A = np.array(rows, dtype=float)
    p = found.p
    nu = len(found.u_columns())
    X = A[:, :p]
    U = _to_objects(A[:, p:p + nu], found.modifier_type, found.modifier_dim)
    _check_rows(found.modifier_space, U, lines, path, "modifier")
    Y = None
    if has_y:
        Y = _to_objects(A[:, p + nu:], found.response_type, found.response_dim)
        _check_rows(found.response_space, Y, lines, path, "response")
    return DatasetTable(X, U, Y, found)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_dataset(path, schema: DatasetSchema | None = None) -> TrainingSet:
    """Read a file with response columns into a validated TrainingSet."""
    return read_table(path, schema, require_response=True).training_set()


def schema_of(training: TrainingSet) -> DatasetSchema:
    def kind_dim(space):
        if space.name == "quantile":
            return "quantile", space.m
        if space.name == "spd":
            return "spd", space.M
        return "scalar", 1

    rk, rd = kind_dim(training.response_space)
    mk, md = kind_dim(training.modifier_space)
    return DatasetSchema(rk, training.p, mk, rd, md)


def write_dataset(path, data: TrainingSet | DatasetTable) -> None:
    """Write a dataset; the header follows from the data's spaces."""
    schema = data.schema if isinstance(data, DatasetTable) else schema_of(data)
    blocks = [np.asarray(data.X, dtype=float).reshape(len(data.X), -1),
              _flatten(data.U, schema.modifier_type)]
    with_y = data.Y is not None
    if with_y:
        blocks.append(_flatten(data.Y, schema.response_type))
    A = np.hstack(blocks)
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema.header(with_response=with_y))
        for row in A:
            w.writerow([_fmt(v) for v in row])


def write_points(path, points, space: MetricSpace, prefix: str = "y", ids=None) -> None:
    """Write one metric object per row (e.g. predictions)."""
    kind = space.name
    dim = {"quantile": getattr(space, "m", 1), "spd": getattr(space, "M", 1)}.get(kind, 1)
    A = _flatten(points, kind)
    cols = point_columns(prefix, kind, dim)
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["id"] if ids is not None else []) + cols)
        for i, row in enumerate(A):
            lead = [str(ids[i])] if ids is not None else []
            w.writerow(lead + [_fmt(v) for v in row])


def write_results(path, rows, columns) -> None:
    """Write dict rows as CSV; floats use the round-trip representation."""
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            out = []
            for c in columns:
                v = r.get(c)
                if v is None:
                    out.append("")
                elif isinstance(v, (float, np.floating)):
                    out.append(_fmt(v))
                else:
                    out.append(str(v))
            w.writerow(out)


# --------------------------------------------------------------------------
# histograms


@dataclass(frozen=True, eq=False)
class HistogramRecord:
    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        e = np.array(self.edges, dtype=float).ravel()
        c = np.array(self.counts, dtype=float).ravel()
        if e.size != c.size + 1 or c.size == 0:
            raise ValidationError(f"need B + 1 edges for B >= 1 bins, got {e.size} edges and {c.size} counts")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(c))):
            raise ValidationError("histogram edges and counts must be finite")
        if np.any(np.diff(e) <= 0):
            raise ValidationError("histogram edges must be strictly increasing")
        if np.any(c < 0):
            raise ValidationError("histogram counts must be nonnegative")
        if not c.sum() > 0:
            raise ValidationError("histogram is empty (counts sum to zero)")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "counts", c)


def histogram_to_quantile(h: HistogramRecord, m: int = 20) -> QuantileFunction:
    """Quantiles at the midpoint grid of the piecewise-uniform distribution.

    Mass is spread uniformly within each bin, so the CDF is linear between
    consecutive edges and its inverse is found by linear interpolation
    inside the bin that contains each level.
    """
    t = quantile_grid(m)
    F = np.concatenate([[0.0], np.cumsum(h.counts)])
    F /= F[-1]
    # first edge index k with F[k] >= t; then F[k-1] < t <= F[k] and bin k-1 has mass
    k = np.searchsorted(F, t, side="left")
    k = np.clip(k, 1, len(h.counts))
    lo, hi = F[k - 1], F[k]
    frac = (t - lo) / (hi - lo)
    q = h.edges[k - 1] + frac * (h.edges[k] - h.edges[k - 1])
    q = np.clip(np.maximum.accumulate(q), h.edges[0], h.edges[-1])
    return QuantileFunction(q)


def read_histograms(path) -> list[tuple[str, HistogramRecord]]:
    """Long-format histogram file with header ``id,lower,upper,count``.

    Rows of one histogram are contiguous and its bins must chain
    (each ``lower`` equals the previous ``upper``).
    """
    out: list[tuple[str, HistogramRecord]] = []
    with _open_in(path) as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file, a header line is required") from None
        if header != ["id", "lower", "upper", "count"]:
            raise ParseError(f"{path}: expected header id,lower,upper,count")
        cur, edges, counts, start = None, [], [], 0

        def flush():
            if cur is None:
                return
            try:
                out.append((cur, HistogramRecord(edges, counts)))
            except ValidationError as exc:
                raise ValidationError(f"{path}, histogram {cur!r} (line {start}): {exc}") from None

        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ParseError(f"{path}, line {line}: expected 4 fields, got {len(row)}")
            hid = row[0].strip()
            try:
                lower, upper, count = (float(c) for c in row[1:])
            except ValueError:
                raise ParseError(f"{path}, line {line}: cannot parse bin values") from None
            if hid != cur:
                if any(h == hid for h, _ in out):
                    raise ParseError(f"{path}, line {line}: rows of histogram {hid!r} are not contiguous")
                flush()
                cur, edges, counts, start = hid, [lower], [], line
            elif lower != edges[-1]:
                raise ValidationError(f"{path}, line {line}: bin lower edge {lower!r} does not match "
                                      f"the previous upper edge {edges[-1]!r}")
            edges.append(upper)
            counts.append(count)
        flush()
    if not out:
        raise ValidationError(f"{path}: no histograms")
    return out


# --------------------------------------------------------------------------
# model persistence


def _encode(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(predictor: FittedPredictor, schema: DatasetSchema | None = None) -> dict:
    """JSON-ready description of a fitted predictor, training data included."""
    t = predictor.training
    schema = schema or schema_of(t)
    hyper = {"ridge": getattr(predictor, "ridge", None)}
    scheme = getattr(predictor, "scheme", None)
    if scheme is not None:
        hyper.update(bandwidth=scheme.bandwidth, weights=scheme.kind.value, kernel=scheme.kernel.kind.value)
    if predictor.method == "lfr":
        bw = np.asarray(predictor.bandwidth, dtype=float)
        hyper.update(bandwidth=bw.tolist() if bw.ndim else float(bw), kernel=predictor.kernel.kind.value,
                     order=predictor.order)
        hyper.pop("ridge")
    return {
        "format": FORMAT_TAG,
        "method": predictor.method,
        "hyperparameters": hyper,
        "schema": schema.to_dict(),
        "data": {"X": _encode(t.X), "U": _encode(t.U), "Y": _encode(t.Y)},
    }


def model_from_dict(doc: dict) -> tuple[FittedPredictor, DatasetSchema]:
    from .baselines import GFRPredictor, LFRPredictor, PFRPredictor
    from .vfr import VFRPredictor

    if not isinstance(doc, dict) or "format" not in doc:
        raise ParseError("model document has no format tag")
    tag = str(doc["format"])
    name, _, version = tag.partition("/")
    if name != FORMAT_NAME or not version.isdigit():
        raise ParseError(f"unrecognised model format {tag!r}")
    if int(version) != FORMAT_VERSION:
        raise UnsupportedVersionError(f"model format {tag!r} is not supported (this build reads {FORMAT_TAG})")
    try:
        schema = DatasetSchema.from_dict(doc["schema"])
        data = doc["data"]
        X = np.array(data["X"], dtype=float).reshape(-1, schema.p)
        training = TrainingSet(X, np.array(data["U"], dtype=float), np.array(data["Y"], dtype=float),
                               schema.response_space, schema.modifier_space)
        method = doc["method"]
        hp = doc.get("hyperparameters", {})
    except KeyError as exc:
        raise ParseError(f"model document lacks field {exc}") from None
    ridge = hp.get("ridge")
    if method == "gfr":
        return GFRPredictor(training, ridge), schema
    if method == "lfr":
        bw = hp["bandwidth"]
        return LFRPredictor(training, tuple(bw) if isinstance(bw, list) else float(bw),
                            Kernel.from_name(hp.get("kernel", "gaussian")), int(hp.get("order", 1))), schema
    if method in ("vfr", "pfr"):
        scheme = WeightScheme(WeightKind(hp["weights"]), float(hp["bandwidth"]),
                              Kernel.from_name(hp.get("kernel", "gaussian")))
        cls = VFRPredictor if method == "vfr" else PFRPredictor
        return cls(training, scheme, ridge), schema
    raise ParseError(f"unknown method {method!r} in model document")


def model_json(predictor: FittedPredictor, schema: DatasetSchema | None = None) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(model_to_dict(predictor, schema), sort_keys=True, indent=1) + "\n"


def write_model(path, predictor: FittedPredictor, schema: DatasetSchema | None = None) -> None:
    text = model_json(predictor, schema)
    with _open_out(path) as fh:
        fh.write(text)


def load_model(path) -> tuple[FittedPredictor, DatasetSchema]:
    with _open_in(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}, line {exc.lineno}: invalid JSON ({exc.msg})") from None
    try:
        return model_from_dict(doc)
    except FrechetVCMError as exc:
        raise type(exc)(f"{path}: {exc}") from None
