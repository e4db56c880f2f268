"""Column view of the data, the normalized inner product and exact covariances.

Data arrive as an ``(n, p)`` observation matrix (one observation per row,
the scikit-learn orientation). Internally the variables are stored as the
rows of a C-contiguous ``(p, n)`` array so that each centered column
``x_k`` is a contiguous vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import _kernels
from .exceptions import DegenerateColumnError, DimensionError

Mode = Literal["covariance", "correlation"]


def check_observations(X, *, min_samples: int = 2) -> np.ndarray:
    """Validate an ``(n, p)`` observation matrix and return it as float64."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=1, ensure_all_finite=True)
    if X.shape[0] < min_samples:
        raise DimensionError(f"need at least {min_samples} samples, got {X.shape[0]}")
    return X


@dataclass(frozen=True, eq=False)
class CenteredColumns:
    """The ``p`` observation vectors of length ``n``, one per variable.

    ``columns[k]`` is ``x_k``. When ``centered`` is true each vector sums to
    zero; in correlation mode every self inner product equals one.
    """

    columns: np.ndarray
    mode: Mode = "covariance"
    centered: bool = True

    def __post_init__(self):
        cols = np.ascontiguousarray(self.columns, dtype=np.float64)
        if cols.ndim != 2:
            raise DimensionError("columns must be a 2-d (p, n) array")
        if cols.shape[1] < 2:
            raise DimensionError(f"need at least 2 samples, got {cols.shape[1]}")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def p(self) -> int:
        return self.columns.shape[0]

    @property
    def n(self) -> int:
        return self.columns.shape[1]

    @property
    def denom(self) -> float:
        return float(self.n - 1)

    def with_zero_columns(self, extra: int) -> "CenteredColumns":
        """Append ``extra`` all-zero columns (used for power-of-two padding)."""
        if extra <= 0:
            return self
        pad = np.zeros((extra, self.n))
        return CenteredColumns(np.vstack([self.columns, pad]), self.mode, self.centered)


def center_columns(X, *, center: bool = True) -> CenteredColumns:
    """Mean-center each variable of an ``(n, p)`` observation matrix.

    With ``center=False`` the raw columns are kept as they are (used for the
    unit-sphere near-duplicate data, whose columns are already normalized).
    """
    X = check_observations(X)
    cols = np.array(X.T, dtype=np.float64, order="C")
    if center:
        cols -= cols.mean(axis=1, keepdims=True)
    return CenteredColumns(cols, "covariance", centered=center)


def inner_product(x, y) -> float:
    """Normalized inner product ``sum(x * y) / (n - 1)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.shape[0] < 2:
        raise DimensionError("inner product needs n >= 2")
    return float(_kernels.dot(x, y) / (x.shape[0] - 1))


def complex_inner_product(x, w) -> complex:
    """``<x, w>`` for real ``x`` and complex ``w``; ``w`` is conjugated."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.complex128)
    if x.ndim != 1 or x.shape != w.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {w.shape}")
    denom = x.shape[0] - 1
    re = _kernels.dot(x, np.ascontiguousarray(w.real)) / denom
    im = _kernels.dot(x, np.ascontiguousarray(w.imag)) / denom
    return complex(re, -im)


def _check_index(cols: CenteredColumns, i: int) -> int:
    i = int(i)
    if not 0 <= i < cols.p:
        raise IndexError(f"index {i} out of range for p={cols.p}")
    return i


def covariance_entry(cols: CenteredColumns, i: int, j: int) -> float:
    """``S_ij = <x_i, x_j>``, evaluated with the smaller index first."""
    i, j = _check_index(cols, i), _check_index(cols, j)
    if j < i:
        i, j = j, i
    return float(_kernels.dot(cols.columns[i], cols.columns[j]) / cols.denom)


def covariance_entries(cols: CenteredColumns, rows, columns) -> np.ndarray:
    """Vectorized :func:`covariance_entry` over index arrays."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    columns = np.asarray(columns, dtype=np.int64).ravel()
    if rows.shape != columns.shape:
        raise DimensionError("row and column index arrays differ in length")
    if rows.size and (min(rows.min(), columns.min()) < 0 or max(rows.max(), columns.max()) >= cols.p):
        raise IndexError("entry index out of range")
    return _kernels.pair_dots(cols.columns, rows, columns, cols.denom)


def covariance_row(cols: CenteredColumns, k: int) -> np.ndarray:
    """Full row ``S_k`` by ``p`` exact inner products."""
    k = _check_index(cols, k)
    return _kernels.row_dots(cols.columns, cols.columns[k], cols.denom)


def dense_covariance(cols: CenteredColumns) -> np.ndarray:
    """All ``p^2`` entries; the O(n p^2) reference used as oracle and baseline."""
    return _kernels.gram(cols.columns, cols.denom)


def correlation_normalize(cols: CenteredColumns) -> CenteredColumns:
    """Scale every column so its self inner product is one."""
    var = _kernels.pair_dots(
        cols.columns, np.arange(cols.p), np.arange(cols.p), cols.denom
    )
    bad = np.flatnonzero(~(var > 0))
    if bad.size:
        raise DegenerateColumnError(int(bad[0]))
    scaled = cols.columns / np.sqrt(var)[:, None]
    return CenteredColumns(scaled, "correlation", cols.centered)


@dataclass(frozen=True, eq=False)
class SparseEntrySet:
    """Compact ``{((i, j), S_ij)}`` representation, sorted by ``(i, j)``."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    p: int = field(default=0)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        if not rows.shape == cols.shape == vals.shape:
            raise DimensionError("rows, cols and values must have equal length")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                raise ValueError("duplicate (i, j) pair in entry set")
        for a in (rows, cols, vals):
            a.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_pairs(cls, cols: CenteredColumns, rows, columns) -> "SparseEntrySet":
        """Evaluate ``S_ij`` exactly for each unique pair."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        columns = np.asarray(columns, dtype=np.int64).ravel()
        if rows.size:
            key = np.unique(rows * cols.p + columns)
            rows, columns = np.divmod(key, cols.p)
        return cls(rows, columns, covariance_entries(cols, rows, columns), cols.p)

    def __len__(self) -> int:
        return int(self.rows.size)

    def __iter__(self):
        for i, j, v in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
            yield (i, j), v

    def index_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def symmetrized(self, cols: CenteredColumns) -> "SparseEntrySet":
        """Union of the pairs with their transposes, values recomputed."""
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        return SparseEntrySet.from_pairs(cols, r, c)

    def thresholded(self, mu: float) -> "SparseEntrySet":
        """Keep only the entries with ``|value| >= mu``."""
        keep = np.abs(self.values) >= mu
        return SparseEntrySet(self.rows[keep], self.cols[keep], self.values[keep], self.p)

    def to_dense(self, p: int | None = None) -> np.ndarray:
        p = self.p if p is None else p
        out = np.zeros((p, p))
        out[self.rows, self.cols] = self.values
        return out

    def to_csv_lines(self) -> Iterable[str]:
        for (i, j), v in self:
            yield f"{i},{j},{v!r}"


class DenseThresholdCovariance(BaseEstimator):
    """Direct O(n p^2) baseline: every entry computed, then hard-thresholded.

    Parameters
    ----------
    mu : float
    correlation : bool
    center : bool
    """

    def __init__(self, mu=0.5, correlation=False, center=True):
        self.mu = mu
        self.correlation = correlation
        self.center = center

    def fit(self, X, y=None):
        cols = center_columns(X, center=self.center)
        if self.correlation:
            cols = correlation_normalize(cols)
        self.covariance_ = dense_covariance(cols)
        rows, js = np.nonzero(np.abs(self.covariance_) >= self.mu)
        self.entries_ = SparseEntrySet(rows, js, self.covariance_[rows, js], cols.p)
        self.n_features_in_ = cols.p
        return self

    def large_entries(self) -> set[tuple[int, int]]:
        check_is_fitted(self, "entries_")
        return self.entries_.index_set()
