"""Command-line interface: ``sparsecov <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys
import time

from . import bench, io
from .exceptions import SparseCovError
from .linalg import center_columns, correlation_normalize, dense_covariance
from .sfft import sfft_cov_estimation
from .sparsity import SparsityProfile, required_samples, verify_profile
from .synth import (
    gen_population_cov,
    gen_population_cov_eps,
    gen_unit_sphere_set,
    sample_gaussian,
)
from .tree import SparseCovTree


def _kv(lines, stream=None):
    stream = stream or sys.stderr
    for line in lines:
        print(line, file=stream)


def _load_columns(args):
    X = io.read_matrix(args.input, header=args.header)
    cols = center_columns(X, center=not args.no_center)
    if getattr(args, "correlation", False):
        cols = correlation_normalize(cols)
    return cols


def cmd_detect(args) -> int:
    cols = _load_columns(args)
    est = SparseCovTree(
        mu=args.mu, n_trees=args.trees, seed=args.seed, chunk_level=args.chunk_level,
        budget=args.budget, symmetrize=args.symmetrize,
    )
    t0 = time.perf_counter()
    est.fit_columns(cols)
    wall = 1000.0 * (time.perf_counter() - t0)
    io.write_entries(args.output, est.entries_)
    s = est.stats_
    _kv([
        f"visited_nodes={s.visited_nodes}",
        f"tests_performed={s.tests_performed}",
        f"inner_products={s.inner_products}",
        f"entries_found={len(est.entries_)}",
        f"budget_exhausted={s.budget_exhausted}",
        f"wall_ms={wall:.3f}",
    ])
    return 0


def cmd_detect_sfft(args) -> int:
    cols = _load_columns(args)
    t0 = time.perf_counter()
    entries, report = sfft_cov_estimation(cols, args.r, args.R_resid, args.epsilon, args.solver, args.seed)
    wall = 1000.0 * (time.perf_counter() - t0)
    io.write_entries(args.output, entries)
    _kv(report.lines() + [f"wall_ms={wall:.3f}"])
    return 0


def cmd_verify(args) -> int:
    if args.matrix:
        A = io.read_matrix(args.input, header=args.header)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise SparseCovError(f"{args.input}: expected a square matrix, got shape {A.shape}")
    else:
        cols = _load_columns(args)
        A = dense_covariance(cols)
    report = verify_profile(A, SparsityProfile(args.r, args.mu, args.R))
    verdict = "PASS" if report.is_full_profile else "FAIL"
    print(f"profile (r={args.r}, mu={args.mu}, R={args.R}, q=2) on a {A.shape[0]}x{A.shape[0]} matrix: {verdict}")
    _kv(report.lines(), sys.stdout)
    return 0 if report.is_full_profile else 1


def cmd_samples(args) -> int:
    report = required_samples(SparsityProfile(args.r, args.mu, args.R), args.p, args.K, args.C)
    _kv(report.lines(), sys.stdout)
    return 0


def cmd_gen(args) -> int:
    if args.family == "sphere":
        X = gen_unit_sphere_set(args.p, args.n, args.seed)
        support = None
    else:
        if args.family == "cov":
            if args.eps:
                raise SparseCovError("--eps needs --family cov-eps")
            model = gen_population_cov(args.p, args.seed)
        else:
            model = gen_population_cov_eps(args.p, args.eps, args.seed)
        X = sample_gaussian(model, args.n, args.seed)
        support = model.support
    io.write_matrix(args.output, X)
    if args.truth:
        if support is None:
            raise SparseCovError("--truth is not available for the sphere family")
        io.write_pairs(args.truth, support)
    return 0


def cmd_bench(args) -> int:
    family = {"runtime": "runtime", "eps": "eps-sweep", "neardup": "near-dup"}[args.kind]
    spec = bench.ExperimentSpec.from_toml(args.spec, family=family, seed=args.seed)
    rows = bench.run_experiment(spec)
    bench.write_csv(args.out, rows)
    failed = sum(1 for r in rows if r.error)
    print(f"rows={len(rows)} errors={failed}", file=sys.stderr)
    return 2 if failed else 0


def _input_args(p):
    p.add_argument("--input", required=True, help="CSV (rows = observations) or SCOVMAT1 binary")
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    p.add_argument("--no-center", action="store_true", help="do not subtract column means")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsecov", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="large entries via random trees")
    _input_args(p)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--trees", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chunk-level", type=int, default=0)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--correlation", action="store_true")
    p.add_argument("--symmetrize", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("detect-sfft", help="large entries via sparse Fourier estimation")
    _input_args(p)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--R-resid", dest="R_resid", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--solver", choices=["exact", "subsampled"], default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--correlation", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_detect_sfft)

    p = sub.add_parser("verify", help="check the (r, mu, R, 2) sparsity profile; exit 1 on failure")
    _input_args(p)
    p.add_argument("--matrix", action="store_true", help="input is the p x p matrix itself")
    p.add_argument("--correlation", action="store_true")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--R", type=float, required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("samples", help="sample size for S to inherit the population sparsity")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--C", type=float, default=8.0)
    p.set_defaults(func=cmd_samples)

    p = sub.add_parser("gen", help="synthetic data")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--family", choices=["cov", "cov-eps", "sphere"], default="cov")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--truth", default=None, help="write the ground-truth support as i,j lines")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run an experiment and write CSV")
    p.add_argument("kind", choices=["runtime", "eps", "neardup"])
    p.add_argument("--spec", required=True, help="TOML experiment spec")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the seed in the experiment file")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SparseCovError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
