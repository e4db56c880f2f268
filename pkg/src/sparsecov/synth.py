"""Synthetic covariance models, Gaussian samples and near-duplicate queries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.sparse.linalg import eigsh

from .exceptions import PreconditionError
from .rng import keyed_generator

DENSE_EIGEN_MAX_P = 8192

# stream ids under the master seed
_STREAM_SUPPORT, _STREAM_EPS, _STREAM_SAMPLE, _STREAM_SPHERE, _STREAM_QUERY, _STREAM_PROFILE = range(1, 7)


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """A population covariance with known large-entry support."""

    Sigma: np.ndarray
    support: frozenset
    r_row: int
    mu_pop: float = 1.0
    epsilon: float = 0.0
    shift: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.Sigma.shape[0]


def row_count(p: int) -> int:
    """``floor(log2(p) / 3)`` new large entries per row."""
    return int(math.floor(math.log2(p) / 3)) if p >= 1 else 0


def eps_crit(p: int, r: int) -> float:
    """``1 / sqrt(4 (p - r))``: the perturbation where ``R(eps)`` reaches ``mu / 2 = 1/2``."""
    if not p > r:
        raise PreconditionError("need p > r")
    return 1.0 / math.sqrt(4.0 * (p - r))


def residual_R(p: int, r: int, epsilon: float) -> float:
    """Row residual ``eps sqrt(p - r)`` of the eps-perturbed family."""
    return epsilon * math.sqrt(p - r)


def samples_p_log_p(p: int, base: float = math.e) -> int:
    """``floor(p log p)`` with a selectable logarithm base."""
    return int(math.floor(p * math.log(p) / math.log(base)))


def _smallest_eigenvalue(A: np.ndarray) -> tuple[float, float]:
    """``lambda_min`` and the safety factor applied to it."""
    if A.shape[0] <= DENSE_EIGEN_MAX_P:
        return float(sla.eigh(A, eigvals_only=True, subset_by_index=[0, 0])[0]), 1.0
    val = eigsh(A, k=1, which="SA", return_eigenvectors=False, tol=1e-6)
    return float(val[0]), 1.1


def gen_population_cov_eps(p: int, epsilon: float, seed: int) -> PopulationModel:
    """Random sparse population covariance, zero entries replaced by ``+-epsilon``.

    Each row draws ``floor(log2(p)/3)`` distinct positions among its still
    unset off-diagonal entries and sets them, and their transposes, to a
    uniform ``+-1``. The other off-diagonal entries are ``+-epsilon``, the
    diagonal is ``+-1``, and finally every diagonal entry is raised by
    ``|lambda_min| + 1``.
    """
    if p < 2:
        raise PreconditionError("p must be at least 2")
    if epsilon < 0:
        raise PreconditionError("epsilon must be non-negative")
    r = row_count(p)
    rng = keyed_generator(seed, _STREAM_SUPPORT)
    A = np.zeros((p, p))
    is_set = np.eye(p, dtype=bool)
    for k in range(p):
        free = np.flatnonzero(~is_set[k])
        take = min(r, free.size)
        if take == 0:
            continue
        js = rng.choice(free, size=take, replace=False)
        signs = rng.choice([-1.0, 1.0], size=take)
        A[k, js] = signs
        A[js, k] = signs
        is_set[k, js] = True
        is_set[js, k] = True
    large = is_set & ~np.eye(p, dtype=bool)
    if epsilon > 0:
        erng = keyed_generator(seed, _STREAM_EPS)
        signs = np.triu(erng.choice([-1.0, 1.0], size=(p, p)), 1)
        signs = signs + signs.T
        A = np.where(large | np.eye(p, dtype=bool), A, epsilon * signs)
    A[np.diag_indices(p)] = rng.choice([-1.0, 1.0], size=p)
    lam, safety = _smallest_eigenvalue(A)
    shift = safety * abs(lam) + 1.0
    A[np.diag_indices(p)] += shift
    rows, cols = np.nonzero(large | np.eye(p, dtype=bool))
    support = frozenset(zip(rows.tolist(), cols.tolist()))
    return PopulationModel(A, support, r, 1.0, float(epsilon), shift)


def gen_population_cov(p: int, seed: int) -> PopulationModel:
    """The exactly sparse family (``epsilon = 0``)."""
    return gen_population_cov_eps(p, 0.0, seed)


def sample_gaussian(model: PopulationModel | np.ndarray, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws from ``N(0, Sigma)`` as an ``(n, p)`` matrix."""
    Sigma = model.Sigma if isinstance(model, PopulationModel) else np.asarray(model, dtype=np.float64)
    if n < 2:
        raise PreconditionError("need n >= 2")
    L = sla.cholesky(Sigma, lower=True)
    G = keyed_generator(seed, _STREAM_SAMPLE).standard_normal((n, Sigma.shape[0]))
    return G @ L.T


def gen_unit_sphere_set(p: int, n: int, seed: int) -> np.ndarray:
    """``(n, p)`` matrix whose columns are uniform on the unit sphere in R^n."""
    G = keyed_generator(seed, _STREAM_SPHERE).standard_normal((n, p))
    return G / np.linalg.norm(G, axis=0, keepdims=True)


def gen_near_dup_query(refset: np.ndarray, j: int, epsilon: float, seed: int) -> np.ndarray:
    """Unit vector with cosine ``sqrt(1 - epsilon)`` to column ``j`` of ``refset``.

    ``u = sqrt(1-eps) x_j + sqrt(eps) v`` where ``v`` is the normalized
    component of a uniform sphere vector orthogonal to ``x_j``.
    """
    refset = np.asarray(refset, dtype=np.float64)
    if not 0 <= j < refset.shape[1]:
        raise PreconditionError(f"column {j} out of range")
    if not 0 < epsilon < 1:
        raise PreconditionError("epsilon must lie in (0, 1)")
    x = refset[:, j]
    rng = keyed_generator(seed, _STREAM_QUERY, j)
    while True:
        z = rng.standard_normal(x.size)
        z /= np.linalg.norm(z)
        v = z - (z @ x) * x
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            break
    return math.sqrt(1.0 - epsilon) * x + math.sqrt(epsilon) * v / nv


def gen_sphere_query(n: int, seed: int) -> np.ndarray:
    """A general query: uniform on the unit sphere."""
    z = keyed_generator(seed, _STREAM_QUERY, -1).standard_normal(n)
    return z / np.linalg.norm(z)


def columns_with_covariance(A, n: int, seed: int) -> np.ndarray:
    """``(n, p)`` data whose sample covariance equals the PSD matrix ``A``.

    The columns are ``sqrt(n-1) Q A^{1/2}`` with ``Q`` a random orthonormal
    basis of the mean-zero subspace, so centering leaves them unchanged and
    ``X^T X / (n-1) = A`` up to rounding. Needs ``n > p``.
    """
    A = np.asarray(A, dtype=np.float64)
    p = A.shape[0]
    if n <= p:
        raise PreconditionError(f"need n > p, got n={n}, p={p}")
    lam, V = np.linalg.eigh(A)
    if lam[0] < -1e-10 * max(1.0, abs(lam[-1])):
        raise PreconditionError("matrix is not positive semidefinite")
    root = V * np.sqrt(np.clip(lam, 0.0, None))
    G = keyed_generator(seed, _STREAM_PROFILE).standard_normal((n, p))
    G -= G.mean(axis=0)
    Q, _ = np.linalg.qr(G)
    return math.sqrt(n - 1) * Q @ root.T


def gen_sparse_profile_cov(p: int, r: int, mu: float, R: float, seed: int) -> PopulationModel:
    """PSD matrix that is (r, mu, R, 2)-sparse with exactly ``r`` large entries per row.

    Columns are split into random groups of ``r``; a group block has
    diagonal ``r mu`` and off-diagonals ``+-mu (1 + 1e-6)``, the margin
    keeping them large after rounding in sampled data. All other entries are
    symmetric Gaussian noise scaled so the largest row residual is
    ``0.999 R``. Redraws the noise (at most 20 times) until the matrix is
    positive definite.
    """
    if r < 1 or p % r:
        raise PreconditionError("r must be a positive divisor of p")
    if not 0 <= R < mu:
        raise PreconditionError("need 0 <= R < mu")
    rng = keyed_generator(seed, _STREAM_PROFILE, 1)
    perm = rng.permutation(p)
    groups = perm.reshape(-1, r)
    A = np.zeros((p, p))
    in_block = np.zeros((p, p), dtype=bool)
    for g in groups:
        s = np.triu(rng.choice([-1.0, 1.0], size=(r, r)), 1)
        blk = mu * (1 + 1e-6) * (s + s.T) + r * mu * np.eye(r)
        A[np.ix_(g, g)] = blk
        in_block[np.ix_(g, g)] = True
    for _ in range(20):
        N = np.triu(rng.standard_normal((p, p)), 1)
        N = np.where(in_block, 0.0, N + N.T)
        if R > 0:
            N *= 0.999 * R / np.linalg.norm(N, axis=1).max()
        else:
            N[:] = 0.0
        M = A + N
        if np.linalg.eigvalsh(M)[0] > 0:
            rows, cols = np.nonzero(in_block)
            return PopulationModel(M, frozenset(zip(rows.tolist(), cols.tolist())), r, mu, 0.0, 0.0)
    raise PreconditionError("could not draw a positive definite instance; lower R")
