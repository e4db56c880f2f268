"""Random-tree group testing for the large entries of a covariance matrix.

Each of ``m`` random binary trees stores, at node ``(h, i)``, the n-vector
``sum_{j in I(h,i)} eta_lj x_j`` where ``I(h, i)`` is the dyadic block of
leaves below the node and ``eta_lj`` are i.i.d. standard normals. For a
query vector ``x`` the values ``y_l = <x, Val(T_l(h, i))>`` are draws of a
centered variable whose variance is ``sum_{j in I(h,i)} <x, x_j>^2``, so
their mean square tests whether the block holds an index with
``|<x, x_j>| >= mu``. The search descends from the root into every child
whose statistic reaches ``3 mu^2 / 4``.

Nodes are numbered from 0: the root is ``(0, 0)`` and the children of
``(h, i)`` are ``(h + 1, 2i)`` and ``(h + 1, 2i + 1)``. Leaves sit at level
``L = log2(p)`` after padding ``p`` to a power of two with zero columns.

Large forests can be processed in column chunks: with ``chunk_level = h0``
only the levels ``1..h0`` are kept resident and the subtree below each
level-``h0`` node is rebuilt on demand. Chunked and resident forests give
identical search results and counters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError, DimensionError
from .linalg import (
    CenteredColumns,
    SparseEntrySet,
    center_columns,
    check_observations,
    correlation_normalize,
)
from .rng import gaussian_stream
from .sparsity import next_power_of_two

DEFAULT_MAX_FOREST_BYTES = 2 * 1024**3


@dataclass
class QueryStats:
    """Work counters for one search; merged by summation.

    ``inner_products`` counts n-length inner products: ``m`` per group test
    plus one per exactly evaluated output entry.
    """

    visited_nodes: int = 0
    tests_performed: int = 0
    inner_products: int = 0
    budget: int | None = None
    budget_exhausted: bool = False

    def merge(self, other: "QueryStats") -> "QueryStats":
        return QueryStats(
            self.visited_nodes + other.visited_nodes,
            self.tests_performed + other.tests_performed,
            self.inner_products + other.inner_products,
            self.budget,
            self.budget_exhausted or other.budget_exhausted,
        )

    def lines(self) -> list[str]:
        return [
            f"visited_nodes={self.visited_nodes}",
            f"tests_performed={self.tests_performed}",
            f"inner_products={self.inner_products}",
            f"budget_exhausted={self.budget_exhausted}",
        ]


@dataclass(frozen=True)
class GroupTestResult:
    sigma_hat_sq: float
    decision: Literal["H0", "H1"]


def test_threshold(mu: float) -> float:
    return 0.75 * mu * mu


def group_test(sigma_hat_sq: float, mu: float) -> GroupTestResult:
    """Decide H1 (block holds a large entry) iff the statistic reaches 3 mu^2/4."""
    decision = "H1" if sigma_hat_sq >= test_threshold(mu) else "H0"
    return GroupTestResult(float(sigma_hat_sq), decision)


group_test.__test__ = False  # not a pytest test despite the name
test_threshold.__test__ = False


def _build_subtree(block: np.ndarray, eta: np.ndarray, top: int) -> dict[int, np.ndarray]:
    """Internal node values of the tree over ``b`` consecutive leaves.

    ``block`` is ``(b, n)``, ``eta`` is ``(m, b)``. Returns arrays of shape
    ``(nodes, m, n)`` keyed by relative level, from ``log2(b) - 1`` down to
    ``top``.
    """
    b, n = block.shape
    depth = b.bit_length() - 1
    out: dict[int, np.ndarray] = {}
    if depth == 0:
        return out
    level = (
        eta.T[0::2, :, None] * block[0::2, None, :]
        + eta.T[1::2, :, None] * block[1::2, None, :]
    )
    h = depth - 1
    if h >= top:
        out[h] = level
    while h > top:
        level = level[0::2] + level[1::2]
        h -= 1
        out[h] = level
    return out


class RandomForest:
    """``m`` random binary trees over the (padded) columns.

    Use :func:`construct_forest` to build one.
    """

    def __init__(self, cols: CenteredColumns, m: int, seed: int, chunk_level: int, p_original: int):
        self.cols = cols
        self.m = int(m)
        self.seed = int(seed)
        self.p = cols.p
        self.p_original = int(p_original)
        self.L = self.p.bit_length() - 1
        self.chunk_level = int(chunk_level)
        self.eta = np.vstack([gaussian_stream(self.seed, l, 0, self.p) for l in range(self.m)])
        self.eta_sq_mean = (self.eta**2).mean(axis=0)
        self._h0 = min(self.chunk_level, max(self.L - 1, 0))
        self._levels: dict[int, np.ndarray] = {}
        self._materialize()

    @property
    def n(self) -> int:
        return self.cols.n

    @property
    def resident(self) -> bool:
        """True when every internal level is held in memory."""
        return self._h0 == 0 or self._h0 >= self.L - 1

    def _chunk_width(self) -> int:
        return self.p >> self._h0

    def _materialize(self):
        X = self.cols.columns
        if self.L == 0:
            return
        if self.resident:
            self._levels = _build_subtree(X, self.eta, 1)
            return
        w = self._chunk_width()
        roots = np.empty((1 << self._h0, self.m, self.n))
        for c in range(1 << self._h0):
            sl = slice(c * w, (c + 1) * w)
            roots[c] = _build_subtree(X[sl], self.eta[:, sl], 0)[0][0]
        self._levels[self._h0] = roots
        level = roots
        for h in range(self._h0 - 1, 0, -1):
            level = level[0::2] + level[1::2]
            self._levels[h] = level

    def _chunk_levels(self, c: int) -> dict[int, np.ndarray]:
        """Absolute-level arrays for the subtree below chunk root ``(h0, c)``."""
        w = self._chunk_width()
        sl = slice(c * w, (c + 1) * w)
        rel = _build_subtree(self.cols.columns[sl], self.eta[:, sl], 1)
        return {h + self._h0: arr for h, arr in rel.items()}

    def resident_bytes(self) -> int:
        return sum(a.nbytes for a in self._levels.values()) + self.eta.nbytes

    def node_value(self, h: int, i: int) -> np.ndarray:
        """``(m, n)`` array of ``Val(T_l(h, i))`` for all trees ``l``."""
        if not (0 <= h <= self.L and 0 <= i < (1 << h)):
            raise IndexError(f"no node ({h}, {i}) in a tree with L={self.L}")
        if h == self.L:
            return self.eta[:, i, None] * self.cols.columns[i][None, :]
        if h == 0:
            if self.L == 0:
                return self.node_value(0, 0)
            return self.node_value(1, 0) + self.node_value(1, 1)
        if h in self._levels:
            return self._levels[h][i].copy()
        c = i >> (h - self._h0)
        return self._chunk_levels(c)[h][i - (c << (h - self._h0))].copy()

    def node_indices(self, h: int, i: int) -> range:
        """Leaf block ``I(h, i)`` as 0-based column indices (padded)."""
        w = self.p >> h
        return range(i * w, (i + 1) * w)


def forest_bytes_estimate(n: int, m: int, p: int, chunk_level: int = 0) -> int:
    """Upper bound on resident bytes: ``8 n m 2p / 2^h0`` plus the top levels."""
    pp = next_power_of_two(p)
    L = pp.bit_length() - 1
    h0 = min(chunk_level, max(L - 1, 0))
    per_chunk = 8 * n * m * 2 * pp // (1 << h0)
    top = 8 * n * m * (2 << h0) if h0 else 0
    return per_chunk + top


def construct_forest(
    cols: CenteredColumns,
    m: int,
    seed: int = 0,
    chunk_level: int = 0,
    *,
    max_bytes: int | None = DEFAULT_MAX_FOREST_BYTES,
) -> RandomForest:
    """Build ``m`` random trees over the columns, padding ``p`` to a power of two.

    ``eta_lj`` is drawn from the counter-based stream keyed by
    ``(seed, l)`` at counter ``j``, so the values do not depend on
    ``chunk_level`` or on build order.
    """
    if m < 1:
        raise ConfigurationError("need at least one tree")
    if cols.p < 1:
        raise DimensionError("need at least one column")
    pp = next_power_of_two(cols.p)
    L = pp.bit_length() - 1
    if not 0 <= chunk_level <= L:
        raise ConfigurationError(f"chunk_level must lie in [0, {L}], got {chunk_level}")
    if max_bytes is not None:
        need = forest_bytes_estimate(cols.n, m, pp, chunk_level)
        if need > max_bytes:
            h = chunk_level
            while h < L and forest_bytes_estimate(cols.n, m, pp, h) > max_bytes:
                h += 1
            raise ConfigurationError(
                f"forest needs about {need / 2**20:.0f} MiB (limit {max_bytes / 2**20:.0f} MiB); "
                f"use chunk_level >= {h}"
            )
    return RandomForest(cols.with_zero_columns(pp - cols.p), m, seed, chunk_level, cols.p)


def node_statistic(x, h: int, i: int, forest: RandomForest) -> float:
    """``(1/m) sum_l <x, Val(T_l(h, i))>^2``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (forest.n,):
        raise DimensionError(f"query must have length {forest.n}")
    y = forest.node_value(h, i) @ x / (forest.n - 1)
    return float(np.mean(y * y))


@dataclass
class SearchResult:
    """Per-query outcome of a forest search."""

    indices: list[np.ndarray]
    visited: np.ndarray
    tests: np.ndarray
    m: int
    budget: int | None = None
    budget_exhausted: bool = False

    @property
    def stats(self) -> QueryStats:
        tests = int(self.tests.sum())
        return QueryStats(
            visited_nodes=int(self.visited.sum()),
            tests_performed=tests,
            inner_products=tests * self.m,
            budget=self.budget,
            budget_exhausted=self.budget_exhausted,
        )


class _Search:
    """Level-synchronous descent for a batch of query vectors.

    Every ``(query, node)`` pair is decided independently, so processing a
    whole level at once gives exactly the sets a depth-first recursion
    would, with the recursion depth replaced by a frontier array.
    """

    def __init__(self, forest: RandomForest, Q: np.ndarray, mu: float, budget: int | None):
        self.f = forest
        self.Q = Q
        self.thr = test_threshold(mu)
        self.budget = budget
        self.spent = 0
        self.exhausted = False
        q = Q.shape[0]
        self.visited = np.zeros(q, dtype=np.int64)
        self.tests = np.zeros(q, dtype=np.int64)
        self.hits_q: list[np.ndarray] = []
        self.hits_j: list[np.ndarray] = []

    def _rows(self, qids: np.ndarray) -> np.ndarray:
        if qids.size == self.Q.shape[0]:
            return self.Q
        return self.Q[qids]

    def _afford(self, count: int) -> int:
        """How many of ``count`` node expansions fit in the remaining budget."""
        if self.budget is None:
            return count
        cost = 2 * self.f.m
        k = min(count, max(0, (self.budget - self.spent) // cost))
        if k < count:
            self.exhausted = True
        self.spent += k * cost
        return k

    def expand(self, qids, nodes, h, levels):
        """Test the children of the entered level-``h`` nodes; return the next frontier."""
        f = self.f
        k = self._afford(qids.size)
        qids, nodes = qids[:k], nodes[:k]
        if not qids.size:
            return qids, nodes
        np.add.at(self.tests, qids, 2)
        denom = f.n - 1
        leaf = h + 1 == f.L
        out_q, out_n = [], []
        starts = np.flatnonzero(np.r_[True, nodes[1:] != nodes[:-1]])
        ends = np.r_[starts[1:], nodes.size]
        for s, e in zip(starts, ends):
            i = int(nodes[s])
            sub = qids[s:e]
            rows = self._rows(sub)
            if leaf:
                pair = f.cols.columns[2 * i : 2 * i + 2]
                y = rows @ pair.T / denom
                stat = y * y * f.eta_sq_mean[2 * i : 2 * i + 2]
            else:
                block = levels[h + 1]
                off = 2 * i - self._offset(h + 1)
                pair = block[off : off + 2].reshape(2 * f.m, f.n)
                y = rows @ pair.T / denom
                y *= y
                stat = np.stack([y[:, : f.m].mean(axis=1), y[:, f.m :].mean(axis=1)], axis=1)
            passed = stat >= self.thr
            for side in (0, 1):
                sel = sub[passed[:, side]]
                if sel.size:
                    out_q.append(sel)
                    out_n.append(np.full(sel.size, 2 * i + side, dtype=np.int64))
        if not out_q:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        nq = np.concatenate(out_q)
        nn = np.concatenate(out_n)
        order = np.lexsort((nq, nn))
        nq, nn = nq[order], nn[order]
        np.add.at(self.visited, nq, 1)
        if leaf:
            self.hits_q.append(nq)
            self.hits_j.append(nn)
        return nq, nn

    _chunk = 0

    def _offset(self, h: int) -> int:
        # first absolute node index stored in the current chunk's level-h array
        f = self.f
        if f.resident or h <= f._h0:
            return 0
        return self._chunk << (h - f._h0)

    def run(self) -> SearchResult:
        f = self.f
        q = self.Q.shape[0]
        qids = np.arange(q, dtype=np.int64)
        nodes = np.zeros(q, dtype=np.int64)
        self.visited += 1
        if f.L == 0:
            self.hits_q.append(qids)
            self.hits_j.append(nodes)
            return self._result()
        if f.resident:
            for h in range(f.L):
                qids, nodes = self.expand(qids, nodes, h, f._levels)
                if self.exhausted:
                    break
            return self._result()
        h0 = f._h0
        for h in range(h0):
            qids, nodes = self.expand(qids, nodes, h, f._levels)
            if self.exhausted:
                return self._result()
        order = np.lexsort((qids, nodes))
        qids, nodes = qids[order], nodes[order]
        for c in np.unique(nodes).tolist():
            sel = nodes == c
            cq, cn = qids[sel], nodes[sel]
            self._chunk = c
            levels = f._chunk_levels(c)
            for h in range(h0, f.L):
                cq, cn = self.expand(cq, cn, h, levels)
                if self.exhausted:
                    return self._result()
        return self._result()

    def _result(self) -> SearchResult:
        f = self.f
        q = self.Q.shape[0]
        if self.hits_q:
            hq = np.concatenate(self.hits_q)
            hj = np.concatenate(self.hits_j)
        else:
            hq = hj = np.empty(0, dtype=np.int64)
        keep = hj < f.p_original
        hq, hj = hq[keep], hj[keep]
        order = np.lexsort((hj, hq))
        hq, hj = hq[order], hj[order]
        bounds = np.searchsorted(hq, np.arange(q + 1))
        indices = [hj[bounds[t] : bounds[t + 1]].copy() for t in range(q)]
        return SearchResult(indices, self.visited, self.tests, f.m, self.budget, self.exhausted)


def search(forest: RandomForest, Q, mu: float, budget: int | None = None) -> SearchResult:
    """Run the tree search for each row of ``Q`` (a ``(q, n)`` array of query vectors)."""
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.ndim != 2 or Q.shape[1] != forest.n:
        raise DimensionError(f"queries must be n-vectors with n={forest.n}")
    if not mu > 0:
        raise ConfigurationError("mu must be positive")
    return _Search(forest, Q, mu, budget).run()


def find_row(x, forest: RandomForest, mu: float, stats: QueryStats | None = None) -> np.ndarray:
    """Indices ``j`` whose block tests lead down to leaf ``j`` for query ``x``.

    ``stats`` is updated in place; its ``budget`` (if set) caps the number
    of inner products this call may spend.
    """
    budget = stats.budget if stats is not None else None
    res = search(forest, x, mu, budget)
    if stats is not None:
        s = res.stats
        stats.visited_nodes += s.visited_nodes
        stats.tests_performed += s.tests_performed
        stats.inner_products += s.inner_products
        stats.budget_exhausted = stats.budget_exhausted or s.budget_exhausted
    return res.indices[0]


def sparse_cov_tree(
    cols: CenteredColumns,
    m: int,
    mu: float,
    seed: int = 0,
    *,
    chunk_level: int = 0,
    budget: int | None = None,
    symmetrize: bool = False,
    max_bytes: int | None = DEFAULT_MAX_FOREST_BYTES,
) -> tuple[SparseEntrySet, QueryStats]:
    """Detect and evaluate the large entries of ``S`` with ``m`` random trees."""
    entries, result, _ = _sparse_cov_tree(cols, m, mu, seed, chunk_level, budget, symmetrize, max_bytes)
    return entries, _with_entries(result.stats, len(entries))


def _with_entries(stats: QueryStats, count: int) -> QueryStats:
    stats.inner_products += count
    return stats


def _sparse_cov_tree(cols, m, mu, seed, chunk_level, budget, symmetrize, max_bytes):
    forest = construct_forest(cols, m, seed, chunk_level, max_bytes=max_bytes)
    result = search(forest, cols.columns, mu, budget)
    rows = np.concatenate([np.full(ix.size, k, dtype=np.int64) for k, ix in enumerate(result.indices)])
    colidx = np.concatenate(result.indices) if result.indices else np.empty(0, dtype=np.int64)
    entries = SparseEntrySet.from_pairs(cols, rows, colidx)
    if symmetrize:
        entries = entries.symmetrized(cols)
    return entries, result, forest


def suggested_budget(p: int, r: int) -> int:
    """``ceil(16 r p log2(p)^2)`` inner products."""
    lg = max(math.log2(max(p, 2)), 1.0)
    return math.ceil(16 * r * p * lg * lg)


def visited_node_bound_check(stats: QueryStats, p: int, r: int, c_emp: float = 16.0) -> bool:
    """Whether the visited-node count stays within ``c_emp r p log2(p)^2``."""
    lg = max(math.log2(max(p, 2)), 1.0)
    return stats.visited_nodes <= c_emp * max(r, 1) * p * lg * lg


class SparseCovTree(BaseEstimator):
    """Sub-quadratic detection of the large entries of a sample covariance.

    Parameters
    ----------
    mu : float
        Detection threshold on ``|S_ij|`` (on the correlation when
        ``correlation=True``).
    n_trees : int
        Number of random trees ``m``.
    seed : int
        Master seed of the tree weights.
    chunk_level : int
        Keep only the top ``chunk_level`` levels resident and rebuild the
        subtrees below on demand; the output does not depend on it.
    budget : int or None
        Cap on the number of n-length inner products spent in the search.
    correlation : bool
        Work on the sample correlation matrix instead of the covariance.
    center : bool
        Subtract column means. Disable for data whose columns are already
        the vectors of interest (e.g. unit-norm reference sets).
    symmetrize : bool
        Add the transpose of every detected pair.
    max_forest_bytes : int or None
        Refuse configurations whose resident forest would exceed this.

    Attributes
    ----------
    entries_ : SparseEntrySet
    stats_ : QueryStats
    row_visited_ : ndarray of shape (n_features,)
    forest_ : RandomForest
    """

    def __init__(
        self,
        mu=0.5,
        n_trees=20,
        seed=0,
        chunk_level=0,
        budget=None,
        correlation=False,
        center=True,
        symmetrize=False,
        max_forest_bytes=DEFAULT_MAX_FOREST_BYTES,
    ):
        self.mu = mu
        self.n_trees = n_trees
        self.seed = seed
        self.chunk_level = chunk_level
        self.budget = budget
        self.correlation = correlation
        self.center = center
        self.symmetrize = symmetrize
        self.max_forest_bytes = max_forest_bytes

    def _columns(self, X) -> CenteredColumns:
        cols = center_columns(X, center=self.center)
        if self.correlation:
            cols = correlation_normalize(cols)
        return cols

    def build_forest(self, X):
        """Construct the forest only, for query workloads; skips the row search."""
        cols = self._columns(X)
        self.columns_ = cols
        self.forest_ = construct_forest(
            cols, self.n_trees, self.seed, self.chunk_level, max_bytes=self.max_forest_bytes
        )
        self.n_features_in_ = cols.p
        return self

    def fit(self, X, y=None):
        """Detect the large entries of the covariance of ``X`` (``n_samples, n_features``)."""
        return self.fit_columns(self._columns(X))

    def fit_columns(self, cols: CenteredColumns):
        """Like :meth:`fit` for data already centered and normalized."""
        t0 = time.perf_counter()
        entries, result, forest = _sparse_cov_tree(
            cols, self.n_trees, self.mu, self.seed, self.chunk_level,
            self.budget, self.symmetrize, self.max_forest_bytes,
        )
        self.columns_ = cols
        self.forest_ = forest
        self.entries_ = entries
        self.stats_ = _with_entries(result.stats, len(entries))
        self.row_visited_ = result.visited
        self.n_features_in_ = cols.p
        self.wall_ms_ = 1000.0 * (time.perf_counter() - t0)
        return self

    def query(self, Y, budget=None) -> SearchResult:
        """Search the fitted forest for new variables.

        ``Y`` has shape ``(n_samples, n_queries)``: each column is observed on
        the same samples as the fitted data, and is centered and normalized
        the same way.
        """
        check_is_fitted(self, "forest_")
        Y = check_observations(Y)
        if Y.shape[0] != self.columns_.n:
            raise DimensionError(f"queries need {self.columns_.n} samples, got {Y.shape[0]}")
        Q = self._columns(Y).columns
        return search(self.forest_, Q, self.mu, budget)

    def to_sparse(self) -> sparse.csr_matrix:
        """Detected entries as a ``(p, p)`` scipy CSR matrix."""
        check_is_fitted(self, "entries_")
        e = self.entries_
        return sparse.csr_matrix((e.values, (e.rows, e.cols)), shape=(self.n_features_in_,) * 2)

    def large_entries(self) -> set[tuple[int, int]]:
        """Detected pairs whose exact value reaches ``mu``."""
        check_is_fitted(self, "entries_")
        return self.entries_.thresholded(self.mu).index_set()
