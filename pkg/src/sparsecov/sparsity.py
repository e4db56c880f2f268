"""Approximate sparsity: large-entry sets, thresholding and sample-size bounds.

A matrix is (r, mu)-sparse when every row has at most ``r`` entries with
``|A_kj| >= mu``; it is (r, mu, R, 2)-sparse when, in addition, the
remaining entries of every row have Euclidean norm at most ``R``. All
logarithms in the formulas below are natural logarithms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import PreconditionError
from .linalg import SparseEntrySet


@dataclass(frozen=True)
class SparsityProfile:
    """Parameters ``(r, mu, R, q)`` of approximate sparsity; only q = 2."""

    r: int
    mu: float
    R: float = 0.0
    q: int = 2

    def __post_init__(self):
        if self.r < 0:
            raise PreconditionError("r must be non-negative")
        if not self.mu > 0:
            raise PreconditionError("mu must be positive")
        if self.R < 0:
            raise PreconditionError("R must be non-negative")
        if self.q != 2:
            raise PreconditionError("only q = 2 is supported")
        if not self.R < self.mu / 2:
            warnings.warn(
                f"R={self.R} >= mu/2={self.mu / 2}: detection guarantees do not apply",
                stacklevel=2,
            )


def large_entries_row(row, mu: float) -> np.ndarray:
    """0-based indices ``j`` with ``|row[j]| >= mu``."""
    return np.flatnonzero(np.abs(np.asarray(row, dtype=np.float64)) >= mu)


def large_entries(A, mu: float) -> set[tuple[int, int]]:
    """All positions ``(k, j)`` with ``|A_kj| >= mu``.

    ``A`` is either a dense square matrix or a :class:`SparseEntrySet`.
    """
    if isinstance(A, SparseEntrySet):
        keep = np.abs(A.values) >= mu
        return set(zip(A.rows[keep].tolist(), A.cols[keep].tolist()))
    rows, cols = np.nonzero(np.abs(np.asarray(A, dtype=np.float64)) >= mu)
    return set(zip(rows.tolist(), cols.tolist()))


def hard_threshold(row, mu: float) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64)
    return np.where(np.abs(row) >= mu, row, 0.0)


@dataclass(frozen=True)
class ProfileReport:
    is_r_mu_sparse: bool
    is_full_profile: bool
    worst_row: int | None
    worst_residual: float
    max_row_count: int

    def lines(self) -> list[str]:
        return [
            f"is_r_mu_sparse={self.is_r_mu_sparse}",
            f"is_full_profile={self.is_full_profile}",
            f"worst_row={self.worst_row if self.worst_row is not None else '-'}",
            f"worst_residual={self.worst_residual!r}",
            f"max_row_count={self.max_row_count}",
        ]


def row_residuals(A, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-row large-entry counts and L2 norms of the remaining entries."""
    A = np.abs(np.asarray(A, dtype=np.float64))
    large = A >= mu
    counts = large.sum(axis=1)
    residual = np.sqrt(np.where(large, 0.0, A * A).sum(axis=1))
    return counts, residual


def verify_profile(A, profile: SparsityProfile) -> ProfileReport:
    """Check (r, mu)- and (r, mu, R, 2)-sparsity of a dense matrix.

    ``worst_row`` names the row with the largest count violation, or failing
    that the row with the largest residual violation; it is ``None`` when
    the full profile holds.
    """
    counts, residual = row_residuals(A, profile.mu)
    count_ok = counts <= profile.r
    resid_ok = residual <= profile.R
    worst = None
    if not count_ok.all():
        worst = int(np.argmax(counts))
    elif not resid_ok.all():
        worst = int(np.argmax(residual))
    return ProfileReport(
        is_r_mu_sparse=bool(count_ok.all()),
        is_full_profile=bool(count_ok.all() and resid_ok.all()),
        worst_row=worst,
        worst_residual=float(residual.max()) if residual.size else 0.0,
        max_row_count=int(counts.max()) if counts.size else 0,
    )


@dataclass(frozen=True)
class SampleSizeReport:
    t: float
    n_required: int
    K: float
    C: float
    binding_term: Literal["first", "second", "third"]

    def lines(self) -> list[str]:
        return [
            f"t={self.t!r}",
            f"n_required={self.n_required}",
            f"K={self.K!r}",
            f"C={self.C!r}",
            f"binding_term={self.binding_term}",
        ]


def sample_margin(profile: SparsityProfile, p: int, K: float) -> tuple[float, str]:
    """The margin ``t`` and which of its three terms is the minimum."""
    mu, R, r = profile.mu, profile.R, profile.r
    if not mu > 2 * R:
        raise PreconditionError(f"need mu > 2R, got mu={mu}, R={R}")
    if p < r:
        raise PreconditionError(f"need p >= r, got p={p}, r={r}")
    terms = (
        (mu - 2 * R) / (2 * math.sqrt(p - r) + 1),
        (mu - R) / 4,
        K * K,
    )
    idx = min(range(3), key=lambda i: terms[i])
    return terms[idx], ("first", "second", "third")[idx]


def required_samples(profile: SparsityProfile, p: int, K: float, C: float = 8.0) -> SampleSizeReport:
    """Samples sufficient for S to inherit the sparsity of the population.

    ``n_required = ceil(C K^4 / t^2 * ln(54 p^2)) + 1`` with
    ``t = min{(mu - 2R) / (2 sqrt(p - r) + 1), (mu - R) / 4, K^2}``.
    The absolute constant ``C`` is not known; 8 is only a default.
    """
    if not K > 0:
        raise PreconditionError("K must be positive")
    if not C > 0:
        raise PreconditionError("C must be positive")
    t, which = sample_margin(profile, p, K)
    n = math.ceil(C * K**4 / t**2 * math.log(54 * p * p)) + 1
    return SampleSizeReport(t=t, n_required=max(n, 2), K=K, C=C, binding_term=which)


def gaussian_psi2_norm(variance) -> float:
    """Sub-gaussian norm of ``N(0, variance)``.

    ``sup_q q^{-1/2} (E|Y|^q)^{1/q}`` is attained at ``q = 1`` for a
    Gaussian, giving ``sqrt(2 / pi) * sigma``.
    """
    return float(math.sqrt(2.0 / math.pi) * math.sqrt(variance))


def _ceil_log_pow(base: int, value: int) -> int:
    # smallest m >= 0 with base**m >= value, in exact integer arithmetic
    m, acc = 0, 1
    while acc < value:
        acc *= base
        m += 1
    return m


def multi_run_count(p: int) -> int:
    """``ceil(log(3p) / log(3))``: independent solver runs per row."""
    if p < 1:
        raise PreconditionError("p must be at least 1")
    return _ceil_log_pow(3, 3 * p)


def next_power_of_two(p: int) -> int:
    return 1 << max(0, int(p - 1).bit_length())


def tree_count(p: int, r: int) -> int:
    """``ceil(64 ln(2 r p L^3))`` with ``L = log2(p) + 1``.

    ``p`` is rounded up to a power of two first, as the trees are built on
    the padded column set.
    """
    if r < 1:
        raise PreconditionError("r must be at least 1")
    if p < 1:
        raise PreconditionError("p must be at least 1")
    pp = next_power_of_two(p)
    L = math.log2(pp) + 1
    return math.ceil(64 * math.log(2 * r * pp * L**3))


def group_test_tree_count(delta: float) -> int:
    """``ceil(64 ln(1 / delta))`` trees: both test error rates are below delta."""
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    return math.ceil(64 * math.log(1.0 / delta))
