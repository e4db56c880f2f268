"""Desk-scale experiment harness: runtime scaling, eps sweep, near-duplicate queries.

Each experiment is described by a flat TOML document mirroring
:class:`ExperimentSpec` and emits :class:`ResultRow` records, written as
CSV with a versioned header comment. Apart from ``wall_ms`` every column
is a deterministic function of the experiment parameters and seed.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterable, Literal

import numpy as np

from .exceptions import ConfigurationError
from .linalg import center_columns, dense_covariance
from .sfft import sfft_cov_estimation
from .sparsity import large_entries, row_residuals
from .synth import (
    gen_near_dup_query,
    gen_population_cov,
    gen_population_cov_eps,
    gen_sphere_query,
    gen_unit_sphere_set,
    eps_crit,
    row_count,
    sample_gaussian,
    samples_p_log_p,
)
from .tree import DEFAULT_MAX_FOREST_BYTES, SparseCovTree, forest_bytes_estimate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CSV_VERSION_LINE = "# sparse-cov-bench v1"
Family = Literal["runtime", "eps-sweep", "near-dup"]
METHODS = ("tree", "sfft-exact", "dense")


@dataclass
class ExperimentSpec:
    """Parameters of one experiment family.

    ``eps_list`` holds absolute values; ``eps_factors`` (multiples of
    ``eps_crit``) is used instead when ``eps_list`` is empty. ``trees``
    may list several tree counts; runtime and near-dup use the first.
    ``chunk_level = -1`` picks the smallest level that fits
    ``max_forest_bytes``.
    """

    family: Family = "runtime"
    p_list: list[int] = field(default_factory=lambda: [256, 512, 1024])
    n_rule: Literal["fixed", "p-log-p"] = "p-log-p"
    n: int = 0
    log_base: float = math.e
    trees: list[int] = field(default_factory=lambda: [20])
    mu: float = 0.5
    eps_list: list[float] = field(default_factory=list)
    eps_factors: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 3.0])
    repetitions: int = 1
    seed: int = 0
    methods: list[str] = field(default_factory=lambda: ["tree", "dense"])
    chunk_level: int = -1
    max_forest_bytes: int = DEFAULT_MAX_FOREST_BYTES
    center: bool = True
    queries: int = 100
    near_dup_eps: float = 0.25

    def __post_init__(self):
        if self.family not in ("runtime", "eps-sweep", "near-dup"):
            raise ConfigurationError(f"unknown family {self.family!r}")
        if isinstance(self.p_list, int):
            self.p_list = [self.p_list]
        if isinstance(self.trees, int):
            self.trees = [self.trees]
        if not self.p_list:
            raise ConfigurationError("p_list must be nonempty")
        if not self.trees or min(self.trees) < 1:
            raise ConfigurationError("trees must hold positive counts")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be at least 1")
        if self.n_rule not in ("fixed", "p-log-p"):
            raise ConfigurationError(f"unknown n_rule {self.n_rule!r}")
        if self.n_rule == "fixed" and self.n < 2:
            raise ConfigurationError("n_rule = 'fixed' needs n >= 2")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigurationError(f"unknown methods {sorted(bad)}")

    def samples(self, p: int) -> int:
        return self.n if self.n_rule == "fixed" else samples_p_log_p(p, self.log_base)

    def eps_values(self, p: int) -> list[float]:
        if self.eps_list:
            return list(self.eps_list)
        ec = eps_crit(p, row_count(p))
        return [f * ec for f in self.eps_factors]

    @classmethod
    def from_mapping(cls, data: dict, **overrides) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown spec keys {sorted(unknown)}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        return cls(**merged)

    @classmethod
    def from_toml(cls, path, **overrides) -> "ExperimentSpec":
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh), **overrides)


@dataclass
class ResultRow:
    method: str
    p: int
    n: int
    m: int = 0
    eps: float = 0.0
    rep: int = 0
    query_kind: str = ""
    wall_ms: float = 0.0
    visited_nodes: int = 0
    inner_products: int = 0
    recall_pct: float = float("nan")
    misdetect_pct: float = float("nan")
    false_entries: int = 0
    error: str = ""


CSV_COLUMNS = [f.name for f in fields(ResultRow)]


def cell_seed(*keys) -> int:
    """A 63-bit seed derived from an integer key tuple."""
    state = np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def resolve_chunk_level(spec: ExperimentSpec, n: int, m: int, p: int) -> int:
    if spec.chunk_level >= 0:
        return spec.chunk_level
    L = max(int(p - 1).bit_length(), 0)
    for h in range(L + 1):
        if forest_bytes_estimate(n, m, p, h) <= spec.max_forest_bytes:
            return h
    return L


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 100.0


def _fit_tree(spec, cols, mu, m, seed, p, n) -> tuple[SparseCovTree, float]:
    est = SparseCovTree(
        mu=mu, n_trees=m, seed=seed, chunk_level=resolve_chunk_level(spec, n, m, p),
        max_forest_bytes=spec.max_forest_bytes,
    )
    t0 = time.perf_counter()
    est.fit_columns(cols)
    return est, 1000.0 * (time.perf_counter() - t0)


def _tree_row(est, wall, truth, p, n, m, **extra) -> ResultRow:
    hit = len(truth & est.entries_.index_set())
    return ResultRow(
        "tree", p, n, m, wall_ms=wall, visited_nodes=est.stats_.visited_nodes,
        inner_products=est.stats_.inner_products, recall_pct=_pct(hit, len(truth)),
        misdetect_pct=100.0 - _pct(hit, len(truth)),
        false_entries=int(np.count_nonzero(np.abs(est.entries_.values) < est.mu)), **extra,
    )


def _error_row(method, p, n, m=0, **extra) -> Callable:
    def make(exc: Exception) -> ResultRow:
        return ResultRow(method, p, n, m, error=f"{type(exc).__name__}: {exc}", **extra)
    return make


def run_runtime_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Wall time, counters and recall per (p, repetition, method)."""
    rows: list[ResultRow] = []
    m = spec.trees[0]
    for p in spec.p_list:
        n = spec.samples(p)
        for rep in range(spec.repetitions):
            seed = cell_seed(spec.seed, p, rep)
            try:
                X = sample_gaussian(gen_population_cov(p, seed), n, seed)
                cols = center_columns(X, center=spec.center)
                t0 = time.perf_counter()
                S = dense_covariance(cols)
                dense_ms = 1000.0 * (time.perf_counter() - t0)
                truth = large_entries(S, spec.mu)
            except Exception as exc:  # record and continue
                rows.extend(_error_row(meth, p, n, m, rep=rep)(exc) for meth in spec.methods)
                continue
            for method in spec.methods:
                try:
                    if method == "dense":
                        rows.append(ResultRow(
                            "dense", p, n, 0, rep=rep, wall_ms=dense_ms,
                            inner_products=p * (p + 1) // 2, recall_pct=100.0, misdetect_pct=0.0,
                        ))
                    elif method == "tree":
                        est, wall = _fit_tree(spec, cols, spec.mu, m, seed, p, n)
                        rows.append(_tree_row(est, wall, truth, p, n, m, rep=rep))
                    else:
                        counts, _ = row_residuals(S, spec.mu)
                        t0 = time.perf_counter()
                        entries, rep_ = sfft_cov_estimation(cols, max(int(counts.max()), 1), 0.0, 1.0, "exact", seed)
                        wall = 1000.0 * (time.perf_counter() - t0)
                        found = entries.index_set()
                        hit = len(truth & found)
                        rows.append(ResultRow(
                            "sfft-exact", p, n, 1, rep=rep, wall_ms=wall,
                            inner_products=rep_.u_entries_read + p + len(entries),
                            recall_pct=_pct(hit, len(truth)), misdetect_pct=100.0 - _pct(hit, len(truth)),
                            false_entries=int(np.count_nonzero(np.abs(entries.values) < spec.mu)),
                        ))
                except Exception as exc:
                    rows.append(_error_row(method, p, n, m, rep=rep)(exc))
    return rows


def run_eps_sweep(spec: ExperimentSpec) -> list[ResultRow]:
    """Tree misdetection and work as the small entries grow from 0 past eps_crit.

    The same seeds are used for every eps, so differences between eps
    values are not sampling noise in the support or the samples.
    ``misdetect_pct`` is measured on the population support (the size-1
    entries and the diagonal); ``recall_pct`` against ``J_mu(S)``.
    """
    rows: list[ResultRow] = []
    p = spec.p_list[0]
    n = spec.samples(p)
    for eps in spec.eps_values(p):
        for rep in range(spec.repetitions):
            seed = cell_seed(spec.seed, p, rep)
            try:
                model = gen_population_cov_eps(p, eps, seed)
                cols = center_columns(sample_gaussian(model, n, seed), center=spec.center)
                truth = large_entries(dense_covariance(cols), spec.mu)
            except Exception as exc:
                rows.extend(_error_row("tree", p, n, m, eps=eps, rep=rep)(exc) for m in spec.trees)
                continue
            for m in spec.trees:
                try:
                    est, wall = _fit_tree(spec, cols, spec.mu, m, seed, p, n)
                    row = _tree_row(est, wall, truth, p, n, m, eps=eps, rep=rep)
                    found = est.entries_.index_set()
                    row.misdetect_pct = 100.0 - _pct(len(model.support & found), len(model.support))
                    rows.append(row)
                except Exception as exc:
                    rows.append(_error_row("tree", p, n, m, eps=eps, rep=rep)(exc))
    return rows


def run_near_dup(spec: ExperimentSpec) -> list[ResultRow]:
    """Per-query work and detection on a unit-sphere reference set.

    One row per query. ``wall_ms`` is the batch time divided by the number
    of queries of that kind. For near-duplicate rows ``recall_pct`` is 100
    when the duplicate index is returned and 0 otherwise; ``false_entries``
    counts the other returned indices.
    """
    rows: list[ResultRow] = []
    m = spec.trees[0]
    for p in spec.p_list:
        n = spec.samples(p)
        seed = cell_seed(spec.seed, p)
        try:
            ref = gen_unit_sphere_set(p, n, seed)
            est = SparseCovTree(
                mu=spec.mu, n_trees=m, seed=seed, center=spec.center, correlation=True,
                chunk_level=resolve_chunk_level(spec, n, m, p), max_forest_bytes=spec.max_forest_bytes,
            ).build_forest(ref)
            dup_idx = np.random.default_rng(seed).integers(0, p, size=spec.queries)
            dup = np.stack([gen_near_dup_query(ref, int(j), spec.near_dup_eps, cell_seed(seed, q))
                            for q, j in enumerate(dup_idx)], axis=1)
            gen = np.stack([gen_sphere_query(n, cell_seed(seed, q)) for q in range(spec.queries)], axis=1)
        except Exception as exc:
            rows.append(_error_row("tree", p, n, m, eps=spec.near_dup_eps)(exc))
            continue
        for kind, Q, targets in (("near-dup", dup, dup_idx), ("general", gen, None)):
            try:
                t0 = time.perf_counter()
                res = est.query(Q)
                per_q = 1000.0 * (time.perf_counter() - t0) / spec.queries
            except Exception as exc:
                rows.append(_error_row("tree", p, n, m, eps=spec.near_dup_eps, query_kind=kind)(exc))
                continue
            for q in range(spec.queries):
                idx = res.indices[q]
                if targets is not None:
                    hit = bool(np.isin(targets[q], idx))
                    recall, false = (100.0 if hit else 0.0), int(idx.size - hit)
                else:
                    recall, false = float("nan"), int(idx.size)
                rows.append(ResultRow(
                    "tree", p, n, m, eps=spec.near_dup_eps, rep=q, query_kind=kind, wall_ms=per_q,
                    visited_nodes=int(res.visited[q]), inner_products=int(res.tests[q]) * m,
                    recall_pct=recall, misdetect_pct=100.0 - recall if targets is not None else float("nan"),
                    false_entries=false,
                ))
    return rows


RUNNERS = {"runtime": run_runtime_experiment, "eps-sweep": run_eps_sweep, "near-dup": run_near_dup}


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    return RUNNERS[spec.family](spec)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path, rows: Iterable[ResultRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_VERSION_LINE + "\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in rows:
            d = asdict(row)
            w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != CSV_VERSION_LINE:
            raise ConfigurationError(f"{path}: missing '{CSV_VERSION_LINE}' header")
        return list(csv.DictReader(fh))


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
