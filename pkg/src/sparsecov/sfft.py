"""Detecting large covariance entries through sparse Fourier estimation.

With ``omega = exp(2 pi i / p)`` and 1-based indices, let

    w_j = (1/p) sum_l x_l omega^{-jl}     and     (u_k)_j = <x_k, w_j>

(``w_j`` is conjugated inside the inner product). Then the forward DFT
``F[y]_j = sum_l y_l omega^{-jl}`` maps ``u_k`` to row ``S_k``, so the large
entries of ``S_k`` are the heavy Fourier coefficients of a vector whose
entries each cost one O(n) inner product. Any sparse spectral solver that
reads few entries of ``u_k`` therefore finds the large entries of row ``k``
cheaply.

All public indices are 0-based: array position ``j`` holds the value for
the 1-based index ``j + 1`` used in the formulas.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Literal, Protocol

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError, PreconditionError
from .linalg import (
    CenteredColumns,
    SparseEntrySet,
    center_columns,
    complex_inner_product,
    correlation_normalize,
    covariance_entries,
)
from .rng import keyed_generator
from .sparsity import multi_run_count


def dft(y, axis: int = -1) -> np.ndarray:
    """``F[y]_j = sum_{l=1}^p y_l omega^{-jl}`` for ``j = 1..p``."""
    y = np.asarray(y)
    return np.roll(np.fft.fft(np.roll(y, 1, axis=axis), axis=axis), -1, axis=axis)


def idft(y, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`dft`, carrying the ``1/p`` factor."""
    y = np.asarray(y)
    return np.roll(np.fft.ifft(np.roll(y, 1, axis=axis), axis=axis), -1, axis=axis)


def compute_W(cols: CenteredColumns) -> np.ndarray:
    """The complex ``(n, p)`` matrix whose column ``j`` is ``w_{j+1}``."""
    return (dft(cols.columns, axis=0) / cols.p).T


class FourierColumns:
    """Access to the vectors ``w_j``, materialized or recomputed per batch.

    ``materialize=None`` keeps ``W`` in memory when it needs at most
    ``max_bytes``.
    """

    def __init__(self, cols: CenteredColumns, materialize: bool | None = None, max_bytes: int = 1 << 30):
        self.cols = cols
        need = 16 * cols.n * cols.p
        self.materialized = need <= max_bytes if materialize is None else bool(materialize)
        if self.materialized:
            w = dft(cols.columns, axis=0) / cols.p
            self._re = np.ascontiguousarray(w.real)
            self._im = np.ascontiguousarray(w.imag)

    @property
    def p(self) -> int:
        return self.cols.p

    def rows(self, js) -> tuple[np.ndarray, np.ndarray]:
        """Real and imaginary parts of ``w_j`` for 0-based ``js``, shape ``(len, n)``."""
        js = np.asarray(js, dtype=np.int64)
        if self.materialized:
            return self._re[js], self._im[js]
        p = self.p
        l = np.arange(1, p + 1)
        phase = np.exp(-2j * np.pi * np.outer(js + 1, l) / p) / p
        w = phase @ self.cols.columns
        return w.real, w.imag

    def column(self, j: int) -> np.ndarray:
        re, im = self.rows([j])
        return re[0] + 1j * im[0]


def u_entry(k: int, j: int, cols: CenteredColumns, W) -> complex:
    """``(u_k)_j = <x_k, w_j>`` for 0-based ``k`` and ``j``.

    ``W`` is either the ``(n, p)`` array from :func:`compute_W` or a
    :class:`FourierColumns`.
    """
    w = W.column(j) if isinstance(W, FourierColumns) else np.asarray(W)[:, j]
    return complex_inner_product(cols.columns[k], w)


class SpectralInput:
    """Lazy vector ``u_k`` that counts how many entries were read."""

    def __init__(self, accessor: Callable[[np.ndarray], np.ndarray], p: int):
        self._accessor = accessor
        self.p = int(p)
        self.entries_read = 0

    @classmethod
    def for_row(cls, fourier: FourierColumns, k: int) -> "SpectralInput":
        x = fourier.cols.columns[k]
        denom = fourier.cols.denom

        def accessor(js):
            re, im = fourier.rows(js)
            return (re @ x - 1j * (im @ x)) / denom

        return cls(accessor, fourier.p)

    @classmethod
    def from_vector(cls, u) -> "SpectralInput":
        u = np.asarray(u, dtype=np.complex128)
        return cls(lambda js: u[js], u.size)

    def __getitem__(self, js) -> np.ndarray:
        js = np.atleast_1d(np.asarray(js, dtype=np.int64))
        self.entries_read += js.size
        return self._accessor(js)

    def read_all(self) -> np.ndarray:
        return self[np.arange(self.p)]


@dataclass(frozen=True)
class SparseSpectralResult:
    """Sparse estimate of ``F[u]``: 0-based support ``J`` and values ``y``."""

    J: np.ndarray
    y: np.ndarray

    def to_dense(self, p: int) -> np.ndarray:
        out = np.zeros(p, dtype=np.complex128)
        out[self.J] = self.y
        return out


class SpectralSolver(Protocol):
    deterministic: bool

    def __call__(self, u: SpectralInput, r: int, delta: float, seed) -> SparseSpectralResult: ...


def _top_r(values: np.ndarray, idx: np.ndarray, r: int) -> np.ndarray:
    # positions of the r largest magnitudes, ties broken by lowest index
    order = np.lexsort((idx, -np.abs(values)))
    return order[:r]


def exact_spectral_solver(u: SpectralInput, r: int) -> SparseSpectralResult:
    """Read all of ``u``, take the full DFT and keep the ``r`` largest outputs."""
    if r < 1:
        raise PreconditionError("r must be at least 1")
    spec = dft(u.read_all())
    idx = np.arange(u.p)
    keep = np.sort(_top_r(spec, idx, r))
    return SparseSpectralResult(keep, spec[keep])


def _coprime_dilation(p: int, rng: np.random.Generator) -> int:
    while True:
        s = int(rng.integers(1, p + 1)) if p > 1 else 1
        if math.gcd(s, p) == 1:
            return s


def _bin_count(p: int, r: int) -> int:
    # largest power-of-two divisor of p not exceeding the smallest power of two >= 2r
    cap = 1 << max(0, (2 * r - 1).bit_length())
    b = 1
    while b * 2 <= cap and p % (b * 2) == 0:
        b *= 2
    return b


def subsampled_plan(p: int, r: int, delta: float, c: float = 2.0) -> tuple[int, int]:
    """Bins ``B`` and random offsets ``T`` used by :func:`subsampled_spectral_solver`."""
    B = _bin_count(p, r)
    T = max(4, math.ceil(c * math.log2(p / delta)))
    return B, T


def subsampled_spectral_solver(
    u: SpectralInput,
    r: int,
    delta: float,
    alpha: float = 1.0,
    seed=0,
    *,
    c: float = 2.0,
) -> SparseSpectralResult:
    """Random-shift aliasing sketch of the ``r`` heaviest coefficients of ``F[u]``.

    A random dilation ``sigma`` (coprime to ``p``) permutes the spectrum.
    For each of ``T`` random offsets ``tau`` the ``B`` entries
    ``u[sigma (tau + s p / B)]`` are read and a ``B``-point FFT folds the
    permuted spectrum into ``B`` bins, bin ``b`` receiving
    ``(B/p) sum_{l = b mod B} S_l omega^{tau l}``. Within each bin a greedy
    pursuit over the ``p/B`` aliased candidates picks up to ``r`` atoms;
    each atom's value is the median of its demodulated samples after the
    other atoms are removed. The global top ``r`` are returned.

    Reads ``B T`` entries with ``B ~ 2r`` and ``T = ceil(c log2(p/delta))``.
    When ``B T >= p`` the full vector is read and the exact answer returned.
    """
    if r < 1:
        raise PreconditionError("r must be at least 1")
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    p = u.p
    B, T = subsampled_plan(p, r, delta, c)
    if B * T >= p:
        return exact_spectral_solver(u, r)
    rng = seed if isinstance(seed, np.random.Generator) else keyed_generator(seed)
    sigma = _coprime_dilation(p, rng)
    sigma_inv = pow(sigma, -1, p) if p > 1 else 1
    taus = rng.integers(0, p, size=T)
    step = p // B
    # 1-based positions t = sigma * (tau + s * step) mod p, stored 0-based
    pos = (sigma * (taus[:, None] + step * np.arange(B)[None, :])) % p
    pos = np.where(pos == 0, p, pos) - 1
    samples = u[pos.ravel()].reshape(T, B)
    # bin b (0..B-1) collects permuted indices l' = b mod B, l' in 1..p
    folded = np.fft.fft(samples, axis=1)
    per_bin = p // B
    scale = B / p
    cand_ids, cand_vals = [], []
    for b in range(B):
        lp = b + B * np.arange(per_bin)
        lp = np.where(lp == 0, p, lp)
        A = scale * np.exp(2j * np.pi * np.outer(taus, lp) / p)
        v = folded[:, b]
        picked: list[int] = []
        resid = v.copy()
        norm0 = np.linalg.norm(v)
        for _ in range(min(r, per_bin, T // 2)):
            if np.linalg.norm(resid) <= 1e-12 * max(norm0, 1e-300):
                break
            corr = np.abs(A.conj().T @ resid)
            corr[picked] = -1.0
            picked.append(int(np.argmax(corr)))
            coef, *_ = np.linalg.lstsq(A[:, picked], v, rcond=None)
            resid = v - A[:, picked] @ coef
        if not picked:
            continue
        coef, *_ = np.linalg.lstsq(A[:, picked], v, rcond=None)
        for a, col in enumerate(picked):
            others = v - A[:, picked] @ coef + A[:, col] * coef[a]
            demod = others / A[:, col]
            est = np.median(demod.real) + 1j * np.median(demod.imag)
            cand_ids.append(int(lp[col]))
            cand_vals.append(est)
    if not cand_ids:
        return SparseSpectralResult(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.complex128))
    lperm = np.asarray(cand_ids, dtype=np.int64)
    vals = np.asarray(cand_vals, dtype=np.complex128)
    orig = (lperm * sigma_inv) % p
    orig = np.where(orig == 0, p, orig) - 1
    keep = _top_r(vals, orig, r)
    order = np.argsort(orig[keep], kind="stable")
    keep = keep[order]
    return SparseSpectralResult(orig[keep], vals[keep])


def _make_solver(solver) -> tuple[Callable, bool]:
    if solver == "exact":
        return (lambda u, r, delta, seed: exact_spectral_solver(u, r)), True
    if solver == "subsampled":
        return (lambda u, r, delta, seed: subsampled_spectral_solver(u, r, delta, 1.0, seed)), False
    if callable(solver):
        return solver, bool(getattr(solver, "deterministic", False))
    raise ConfigurationError(f"unknown solver {solver!r}")


@dataclass
class SFFTReport:
    rows_complete: int
    rows_failed: list[int] = field(default_factory=list)
    entries_found: int = 0
    u_entries_read: int = 0
    runs_per_row: int = 1
    delta: float = 0.0
    M: float = 0.0
    out_of_contract: bool = False

    def lines(self) -> list[str]:
        return [
            f"rows_complete={self.rows_complete}",
            f"rows_failed={len(self.rows_failed)}",
            f"entries_found={self.entries_found}",
            f"u_entries_read={self.u_entries_read}",
            f"runs_per_row={self.runs_per_row}",
            f"delta={self.delta!r}",
            f"out_of_contract={self.out_of_contract}",
        ]


def sfft_delta(cols: CenteredColumns, r: int, R: float, epsilon: float) -> tuple[float, float]:
    """``delta = epsilon / (R + sqrt(r) M)`` with ``M = max_i S_ii``; returns ``(delta, M)``."""
    diag = covariance_entries(cols, np.arange(cols.p), np.arange(cols.p))
    M = float(diag.max())
    denom = R + math.sqrt(r) * M
    if not denom > 0:
        raise PreconditionError("R + sqrt(r) M must be positive")
    return epsilon / denom, M


def sfft_cov_estimation(
    cols: CenteredColumns,
    r: int,
    R: float,
    epsilon: float,
    solver: Literal["exact", "subsampled"] | Callable = "exact",
    seed: int = 0,
    *,
    fourier: FourierColumns | None = None,
) -> tuple[SparseEntrySet, SFFTReport]:
    """Candidate large entries of every row via a sparse spectral solver.

    Each row runs ``multi_run_count(p)`` independent solver calls (one for
    a deterministic solver) and the union of their supports is evaluated
    exactly. Row failures are recorded in the report, not raised.
    """
    if r < 1:
        raise PreconditionError("r must be at least 1")
    if R < 0 or not epsilon > 0:
        raise PreconditionError("need R >= 0 and epsilon > 0")
    fn, deterministic = _make_solver(solver)
    delta, M = sfft_delta(cols, r, R, epsilon)
    out_of_contract = not delta < 1
    delta_eff = min(delta, 0.999)
    runs = 1 if deterministic else multi_run_count(cols.p)
    fourier = fourier if fourier is not None else FourierColumns(cols)
    rows, colidx = [], []
    failed: list[int] = []
    reads = 0
    for k in range(cols.p):
        u = SpectralInput.for_row(fourier, k)
        try:
            found = set()
            for run in range(runs):
                res = fn(u, r, delta_eff, keyed_generator(seed, k, run))
                found.update(np.asarray(res.J).tolist())
        except Exception:
            failed.append(k)
            reads += u.entries_read
            continue
        reads += u.entries_read
        js = sorted(found)
        rows.extend([k] * len(js))
        colidx.extend(js)
    entries = SparseEntrySet.from_pairs(cols, rows, colidx)
    report = SFFTReport(
        rows_complete=cols.p - len(failed),
        rows_failed=failed,
        entries_found=len(entries),
        u_entries_read=reads,
        runs_per_row=runs,
        delta=delta,
        M=M,
        out_of_contract=out_of_contract,
    )
    return entries, report


class SFFTCovEstimator(BaseEstimator):
    """Large covariance entries through sparse Fourier estimation of each row.

    Parameters
    ----------
    r : int
        Bound on large entries per row.
    R : float
        Bound on the L2 norm of the remaining entries of each row.
    epsilon : float
        Accuracy slack; the solver tolerance is ``epsilon / (R + sqrt(r) M)``.
    solver : {"exact", "subsampled"} or callable
    seed : int
    correlation, center : bool
        As in :class:`~sparsecov.tree.SparseCovTree`.
    """

    def __init__(self, r=1, R=0.0, epsilon=0.1, solver="exact", seed=0, correlation=False, center=True):
        self.r = r
        self.R = R
        self.epsilon = epsilon
        self.solver = solver
        self.seed = seed
        self.correlation = correlation
        self.center = center

    def fit(self, X, y=None):
        t0 = time.perf_counter()
        cols = center_columns(X, center=self.center)
        if self.correlation:
            cols = correlation_normalize(cols)
        self.entries_, self.report_ = sfft_cov_estimation(
            cols, self.r, self.R, self.epsilon, self.solver, self.seed
        )
        self.n_features_in_ = cols.p
        self.wall_ms_ = 1000.0 * (time.perf_counter() - t0)
        return self

    def large_entries(self, mu: float) -> set[tuple[int, int]]:
        check_is_fitted(self, "entries_")
        return self.entries_.thresholded(mu).index_set()
