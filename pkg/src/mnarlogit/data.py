"""Dataset container, tabular I/O and design-matrix construction."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDataError, InputError, SingularDesignError

MISSING_MARKERS = frozenset({"", "na"})
CONTINUOUS = "continuous"
BINARY = "binary"


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates, a partially missing binary outcome and its selection indicator.

    ``y`` stores ``nan`` where the outcome is missing; ``s`` is 1 exactly
    where ``y`` is observed. Arrays are read-only after construction.
    """

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    column_names: tuple
    column_kinds: tuple

    def __post_init__(self):
        x = _readonly(self.x)
        y = _readonly(np.reshape(self.y, -1))
        s = _readonly(np.reshape(self.s, -1))
        n = y.shape[0]
        if n == 0:
            raise InputError("dataset has zero rows")
        if x.ndim != 2 or x.shape[0] != n:
            raise InputError(f"x must be an (n, p) matrix with n={n}, got shape {x.shape}")
        if s.shape[0] != n:
            raise InputError(f"s has length {s.shape[0]}, expected {n}")
        if not np.all(np.isfinite(x)):
            raise InputError("covariates contain non-finite values")
        if not np.all((s == 0) | (s == 1)):
            raise InputError("s must be 0/1")
        missing = np.isnan(y)
        if not np.array_equal(missing, s == 0):
            raise InputError("y must be missing exactly where s == 0")
        if not np.all((y[~missing] == 0) | (y[~missing] == 1)):
            raise InputError("observed outcomes must be 0/1")
        p = x.shape[1]
        names = tuple(self.column_names) if self.column_names is not None else tuple(
            f"x{j + 1}" for j in range(p))
        kinds = tuple(self.column_kinds) if self.column_kinds is not None else infer_kinds(x)
        if len(names) != p or len(kinds) != p:
            raise InputError("column_names/column_kinds must have one entry per covariate")
        if any(k not in (CONTINUOUS, BINARY) for k in kinds):
            raise InputError(f"unknown column kind in {kinds}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "column_kinds", kinds)

    @classmethod
    def from_arrays(cls, x, y, s=None, column_names=None, column_kinds=None):
        """Build from arrays; ``s`` defaults to ``~isnan(y)``."""
        y = np.asarray(y, dtype=float).reshape(-1)
        if s is None:
            s = (~np.isnan(y)).astype(float)
        else:
            s = np.asarray(s, dtype=float).reshape(-1)
            y = np.where(s == 1, y, np.nan)
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        return cls(x, y, s, column_names, column_kinds)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def observed(self):
        return self.s == 1

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y, equal_nan=True)
            and np.array_equal(self.s, other.s)
            and self.column_names == other.column_names
            and self.column_kinds == other.column_kinds
        )

    def take(self, idx):
        """Rows ``idx`` (any integer index array, repeats allowed)."""
        idx = np.asarray(idx)
        return Dataset(self.x[idx], self.y[idx], self.s[idx],
                       self.column_names, self.column_kinds)


def infer_kinds(x):
    x = np.asarray(x, dtype=float)
    return tuple(
        BINARY if np.all((col == 0) | (col == 1)) else CONTINUOUS for col in x.T)


def _is_missing(value):
    if value is None:
        return True
    if isinstance(value, float) and math.isnan(value):
        return True
    return isinstance(value, str) and value.strip().lower() in MISSING_MARKERS


def _parse_number(value, col, row):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        out = float(value)
    else:
        try:
            out = float(str(value).strip())
        except ValueError:
            raise InputError(f"row {row}: column {col!r} is not numeric: {value!r}") from None
    if not math.isfinite(out):
        raise InputError(f"row {row}: column {col!r} is not finite: {value!r}")
    return out


def from_records(rows, outcome_col, covariate_cols, column_kinds=None):
    """Build a :class:`Dataset` from an iterable of mappings.

    The outcome may be 0, 1 or a missing marker (empty field, ``None``,
    ``nan`` or ``"NA"`` in any case). Covariates must all be numeric.
    ``column_kinds`` overrides the binary/continuous detection.
    """
    covariate_cols = list(covariate_cols)
    xs, ys = [], []
    for i, row in enumerate(rows):
        try:
            raw_y = row[outcome_col]
            raw_x = [row[c] for c in covariate_cols]
        except KeyError as exc:
            raise InputError(f"row {i}: missing column {exc.args[0]!r}") from None
        if _is_missing(raw_y):
            ys.append(math.nan)
        else:
            v = _parse_number(raw_y, outcome_col, i)
            if v not in (0.0, 1.0):
                raise InputError(f"row {i}: outcome must be 0, 1 or missing, got {raw_y!r}")
            ys.append(v)
        xs.append([_parse_number(v, c, i) for v, c in zip(raw_x, covariate_cols)])
    if not ys:
        raise InputError("no data rows")
    x = np.array(xs, dtype=float).reshape(len(ys), len(covariate_cols))
    return Dataset.from_arrays(x, np.array(ys), column_names=covariate_cols,
                               column_kinds=column_kinds)


def _fmt(v):
    return "" if math.isnan(v) else repr(float(v))


def to_records(d, outcome_col="y", include_s=True):
    """Inverse of :func:`from_records`; missing outcomes become empty strings."""
    out = []
    for i in range(d.n):
        row = {c: _fmt(d.x[i, j]) for j, c in enumerate(d.column_names)}
        row[outcome_col] = "" if d.s[i] == 0 else str(int(d.y[i]))
        if include_s:
            row["s"] = str(int(d.s[i]))
        out.append(row)
    return out


def read_csv(path, outcome_col, covariate_cols=None, column_kinds=None):
    """Read a header-row CSV. ``covariate_cols=None`` takes every other column
    except ``s`` and ``y_full`` (written by the ``dgp`` command)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if outcome_col not in header:
            raise InputError(f"outcome column {outcome_col!r} not in {header}")
        if covariate_cols is None:
            covariate_cols = [c for c in header if c not in (outcome_col, "s", "y_full")]
        unknown = [c for c in covariate_cols if c not in header]
        if unknown:
            raise InputError(f"covariate columns not found: {unknown}")
        rows = list(reader)
    return from_records(rows, outcome_col, covariate_cols, column_kinds)


def write_csv(path, d, outcome_col="y", include_s=True, extra_columns=None):
    """Write ``d`` as CSV to a path or text stream; missing outcomes are empty fields."""
    records = to_records(d, outcome_col, include_s)
    fields = list(d.column_names) + [outcome_col] + (["s"] if include_s else [])
    for name, values in (extra_columns or {}).items():
        fields.append(name)
        for row, v in zip(records, values):
            row[name] = str(int(v)) if float(v).is_integer() else repr(float(v))
    if hasattr(path, "write"):
        _dump(path, fields, records)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _dump(fh, fields, records)


def _dump(fh, fields, records):
    writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)


def observed_subsample(d):
    """Rows with ``s == 1``."""
    keep = np.flatnonzero(d.s == 1)
    if keep.size == 0:
        raise DegenerateDataError("observed subsample is empty (all outcomes missing)")
    return d.take(keep)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Intercept-first model matrix with column labels."""

    values: np.ndarray
    labels: tuple

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 2 or v.shape[1] != len(self.labels):
            raise InputError("design values/labels mismatch")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def shape(self):
        return self.values.shape

    def check_rank(self):
        rank = np.linalg.matrix_rank(self.values)
        if rank < self.values.shape[1]:
            raise SingularDesignError(
                f"design has rank {rank} < {self.values.shape[1]} columns {self.labels}")
        return self


def make_design(x, labels=None, extra=None, extra_labels=None):
    """``[1, x, extra...]`` with labels ``("intercept", ...)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    labels = list(labels) if labels is not None else [f"x{j + 1}" for j in range(x.shape[1])]
    cols = [np.ones((x.shape[0], 1)), x]
    names = ["intercept", *labels]
    if extra is not None:
        extra = np.asarray(extra, dtype=float).reshape(x.shape[0], -1)
        cols.append(extra)
        names.extend(extra_labels or [f"z{j + 1}" for j in range(extra.shape[1])])
    return DesignMatrix(np.hstack(cols), tuple(names))
