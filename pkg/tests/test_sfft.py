import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsecov.exceptions import ConfigurationError, PreconditionError
from sparsecov.linalg import center_columns, dense_covariance
from sparsecov.sfft import (
    FourierColumns,
    SFFTCovEstimator,
    SpectralInput,
    compute_W,
    dft,
    exact_spectral_solver,
    idft,
    sfft_cov_estimation,
    subsampled_plan,
    subsampled_spectral_solver,
    u_entry,
)
from sparsecov.sparsity import large_entries, multi_run_count
from sparsecov.synth import columns_with_covariance, gen_sparse_profile_cov

# reads per solver call are at most C_READS * r * ln(p/delta) * ln(p/r) on the test instances
C_READS = 2.0


def naive_dft(y):
    p = len(y)
    j = np.arange(1, p + 1)
    return np.array([np.sum(y * np.exp(-2j * np.pi * jj * j / p)) for jj in j])


def naive_W(cols):
    p = cols.p
    l = np.arange(1, p + 1)
    return np.stack(
        [(cols.columns * np.exp(-2j * np.pi * j * l / p)[:, None]).sum(axis=0) / p for j in l], axis=1
    )


def test_dft_convention():
    y = np.random.default_rng(0).standard_normal(7) + 1j
    np.testing.assert_allclose(dft(y), naive_dft(y), atol=1e-12)
    np.testing.assert_allclose(idft(dft(y)), y, atol=1e-12)


def test_W_single_column():
    cols = center_columns(np.array([[1.0], [3.0], [2.0]]))
    np.testing.assert_allclose(compute_W(cols)[:, 0], cols.columns[0])


def test_W_two_columns():
    cols = center_columns(np.random.default_rng(1).standard_normal((5, 2)))
    W = compute_W(cols)
    x1, x2 = cols.columns
    np.testing.assert_allclose(W[:, 0], (-x1 + x2) / 2, atol=1e-15)
    np.testing.assert_allclose(W[:, 1], (x1 + x2) / 2, atol=1e-15)


def test_W_matches_naive():
    cols = center_columns(np.random.default_rng(2).standard_normal((4, 8)))
    np.testing.assert_allclose(compute_W(cols), naive_W(cols), atol=1e-10)


def test_fourier_columns_on_demand():
    cols = center_columns(np.random.default_rng(3).standard_normal((6, 10)))
    lazy = FourierColumns(cols, materialize=False)
    eager = FourierColumns(cols, materialize=True)
    assert not lazy.materialized and eager.materialized
    js = np.array([0, 4, 9])
    for a, b in zip(lazy.rows(js), eager.rows(js)):
        np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(eager.column(3), compute_W(cols)[:, 3])


def test_u_entry_hand_instance():
    X = np.random.default_rng(4).standard_normal((5, 4))
    cols = center_columns(X)
    W = naive_W(cols)
    for k in range(4):
        for j in range(4):
            expected = np.sum(cols.columns[k] * np.conj(W[:, j])) / 4
            assert u_entry(k, j, cols, compute_W(cols)) == pytest.approx(expected, abs=1e-12)


def test_u_entry_zero_column():
    X = np.random.default_rng(5).standard_normal((5, 3))
    X[:, 1] = 1.0
    cols = center_columns(X)
    assert u_entry(1, 2, cols, FourierColumns(cols)) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(2, 30), st.integers(0, 10**6))
def test_reduction_identity(p, n, seed):
    cols = center_columns(np.random.default_rng(seed).standard_normal((n, p)))
    S = dense_covariance(cols)
    f = FourierColumns(cols)
    for k in range(p):
        spec = dft(SpectralInput.for_row(f, k).read_all())
        scale = max(np.linalg.norm(S[k]), 1e-300)
        assert np.linalg.norm(spec - S[k]) / scale <= 1e-9


def test_exact_solver_sparse_inputs():
    p = 16
    s = np.zeros(p)
    s[5] = 3.0
    res = exact_spectral_solver(SpectralInput.from_vector(idft(s)), 1)
    assert res.J.tolist() == [5]
    s[[1, 9, 12]] = [-1.0, 2.0, 0.5]
    res = exact_spectral_solver(SpectralInput.from_vector(idft(s)), 4)
    assert res.J.tolist() == [1, 5, 9, 12]
    np.testing.assert_allclose(res.y.real, s[[1, 5, 9, 12]], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 10**6))
def test_exact_solver_is_optimal_top_r(p, r, seed):
    s = np.random.default_rng(seed).standard_normal(p)
    u = SpectralInput.from_vector(idft(s))
    res = exact_spectral_solver(u, r)
    assert u.entries_read == p
    order = np.lexsort((np.arange(p), -np.abs(s)))[:r]
    assert set(res.J.tolist()) == set(order.tolist())
    best = np.sort(np.abs(s))[::-1]
    err = np.linalg.norm(s - res.to_dense(p))
    assert err == pytest.approx(np.sqrt((best[r:] ** 2).sum()), abs=1e-9)


def test_exact_solver_tie_break_lowest_index():
    s = np.array([1.0, 2.0, 2.0, 2.0])
    res = exact_spectral_solver(SpectralInput.from_vector(idft(s)), 2)
    assert res.J.tolist() == [1, 2]


def test_subsampled_one_sparse():
    p = 512
    good = 0
    for t in range(300):
        g = np.random.default_rng(t)
        s = np.zeros(p)
        j = int(g.integers(p))
        s[j] = g.choice([-1, 1]) * g.uniform(1, 3)
        res = subsampled_spectral_solver(SpectralInput.from_vector(idft(s)), 1, 0.1, seed=t)
        good += res.J.tolist() == [j]
    assert good >= 200


def test_subsampled_degenerate_is_exact():
    s = np.random.default_rng(1).standard_normal(32)
    u1, u2 = SpectralInput.from_vector(idft(s)), SpectralInput.from_vector(idft(s))
    a = subsampled_spectral_solver(u1, 3, 1e-9, seed=0)
    b = exact_spectral_solver(u2, 3)
    assert a.J.tolist() == b.J.tolist()
    np.testing.assert_allclose(a.y, b.y)
    assert u1.entries_read == 32


def test_subsampled_read_counter_bound():
    p, r, delta = 2048, 3, 0.05
    for t in range(20):
        g = np.random.default_rng(t)
        s = 0.01 * g.standard_normal(p) / math.sqrt(p)
        s[g.choice(p, r, replace=False)] = 1.0
        u = SpectralInput.from_vector(idft(s))
        subsampled_spectral_solver(u, r, delta, seed=t)
        B, T = subsampled_plan(p, r, delta)
        assert u.entries_read == B * T < p
        assert u.entries_read <= C_READS * r * math.log(p / delta) * math.log(p / r)


def test_subsampled_validation():
    u = SpectralInput.from_vector(np.ones(8))
    for kwargs in ({"r": 0, "delta": 0.1}, {"r": 1, "delta": 1.0}, {"r": 1, "delta": 0.1, "alpha": 0}):
        with pytest.raises(PreconditionError):
            subsampled_spectral_solver(u, **kwargs)


def _instance(p, seed, n=None):
    model = gen_sparse_profile_cov(p, 2, 1.0, 0.3, seed)
    return center_columns(columns_with_covariance(model.Sigma, n or p + 16, seed))


def test_algorithm_exact_solver_covers_large_entries():
    for seed in range(3):
        cols = _instance(64, seed)
        S = dense_covariance(cols)
        entries, report = sfft_cov_estimation(cols, 2, 0.3, 0.3, "exact", seed)
        assert large_entries(S, 1.0) <= entries.index_set()
        assert report.runs_per_row == 1 and report.rows_complete == 64
        assert report.u_entries_read == 64 * 64
        assert np.array_equal(entries.values, S[entries.rows, entries.cols])
        assert report.delta == pytest.approx(0.3 / (0.3 + math.sqrt(2) * report.M))


def test_union_monotonicity():
    cols = _instance(128, 0)
    S = dense_covariance(cols)
    f = FourierColumns(cols)
    for k in (0, 17, 99):
        u = SpectralInput.for_row(f, k)
        runs = [subsampled_spectral_solver(u, 2, 0.2, seed=s) for s in range(multi_run_count(128))]
        union = sorted(set().union(*(r.J.tolist() for r in runs)))
        kept = np.zeros(128)
        kept[union] = S[k, union]
        best = min(np.linalg.norm(S[k] - r.to_dense(128)) for r in runs)
        assert np.linalg.norm(S[k] - kept) <= best + 1e-12


def test_entry_read_accounting():
    cols = _instance(128, 1)
    f = FourierColumns(cols, materialize=False)
    calls = {"n": 0}
    orig = f.rows

    def counting(js):
        calls["n"] += len(np.atleast_1d(js))
        return orig(js)

    f.rows = counting
    _, report = sfft_cov_estimation(cols, 2, 0.3, 0.3, "subsampled", 0, fourier=f)
    # every u-entry read costs one complex n-length inner product
    assert report.u_entries_read == calls["n"]
    assert report.runs_per_row == multi_run_count(128)


def test_out_of_contract_flag():
    cols = _instance(32, 2)
    _, report = sfft_cov_estimation(cols, 2, 0.3, 100.0, "subsampled", 0)
    assert report.out_of_contract and report.delta >= 1
    assert "out_of_contract=True" in report.lines()


def test_failed_rows_are_reported():
    cols = _instance(16, 0)

    def flaky(u, r, delta, seed):
        raise RuntimeError("boom")

    entries, report = sfft_cov_estimation(cols, 2, 0.3, 0.3, flaky, 0)
    assert report.rows_complete == 0 and len(report.rows_failed) == 16 and len(entries) == 0
    with pytest.raises(ConfigurationError):
        sfft_cov_estimation(cols, 2, 0.3, 0.3, "nope", 0)


def test_estimator():
    X = columns_with_covariance(gen_sparse_profile_cov(32, 2, 1.0, 0.3, 0).Sigma, 48, 0)
    est = SFFTCovEstimator(r=2, R=0.3, epsilon=0.3).fit(X)
    assert est.large_entries(1.0) == large_entries(np.cov(X, rowvar=False), 1.0)
    assert est.get_params()["solver"] == "exact"
