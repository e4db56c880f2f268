import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from sparsecov.exceptions import DegenerateColumnError, DimensionError
from sparsecov.linalg import (
    CenteredColumns,
    DenseThresholdCovariance,
    SparseEntrySet,
    center_columns,
    check_observations,
    complex_inner_product,
    correlation_normalize,
    covariance_entries,
    covariance_entry,
    covariance_row,
    dense_covariance,
    inner_product,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_inner_product_uses_n_minus_one():
    assert inner_product([1.0, 2.0, 3.0], [1.0, 1.0, 1.0]) == pytest.approx(3.0)


def test_inner_product_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        inner_product([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        inner_product([1.0], [1.0])


def test_complex_inner_product_conjugates():
    x = np.array([1.0, 2.0, 0.0])
    w = np.array([1j, 1.0, 0.0])
    assert complex_inner_product(x, w) == pytest.approx((2.0 - 1j) / 2)


def test_dense_matches_numpy_cov(rng):
    X = rng.standard_normal((50, 9))
    S = dense_covariance(center_columns(X))
    np.testing.assert_allclose(S, np.cov(X, rowvar=False), rtol=1e-12, atol=1e-14)
    assert np.array_equal(S, S.T)


def test_entries_bit_identical_to_dense(small_cols):
    S = dense_covariance(small_cols)
    i, j = np.triu_indices(small_cols.p)
    vals = covariance_entries(small_cols, j, i)
    assert np.array_equal(vals, S[j, i])
    assert covariance_entry(small_cols, 4, 2) == S[2, 4]
    assert np.array_equal(covariance_row(small_cols, 3), S[3])


def test_check_observations_errors():
    with pytest.raises(DimensionError):
        check_observations(np.ones((1, 3)))
    with pytest.raises(ValueError):
        check_observations(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_centering_and_no_centering(rng):
    X = rng.standard_normal((10, 3)) + 5.0
    c = center_columns(X)
    np.testing.assert_allclose(c.columns.sum(axis=1), 0.0, atol=1e-12)
    raw = center_columns(X, center=False)
    np.testing.assert_array_equal(raw.columns, X.T)
    assert not raw.centered


def test_columns_are_read_only(small_cols):
    with pytest.raises(ValueError):
        small_cols.columns[0, 0] = 1.0


def test_zero_padding(small_cols):
    padded = small_cols.with_zero_columns(3)
    assert padded.p == small_cols.p + 3
    assert not padded.columns[-3:].any()
    assert small_cols.with_zero_columns(0) is small_cols


def test_correlation_normalize(small_cols):
    corr = correlation_normalize(small_cols)
    np.testing.assert_allclose(np.diag(dense_covariance(corr)), 1.0, rtol=1e-13)
    assert corr.mode == "correlation"


def test_correlation_rejects_constant_column(rng):
    X = rng.standard_normal((8, 3))
    X[:, 1] = 2.0
    with pytest.raises(DegenerateColumnError) as info:
        correlation_normalize(center_columns(X))
    assert info.value.column == 1


def test_entry_set_sorted_and_unique(small_cols):
    e = SparseEntrySet.from_pairs(small_cols, [3, 1, 3, 1], [0, 2, 0, 5])
    assert [ij for ij, _ in e] == [(1, 2), (1, 5), (3, 0)]
    with pytest.raises(ValueError):
        SparseEntrySet([0, 0], [1, 1], [1.0, 2.0])


def test_entry_set_helpers(small_cols):
    e = SparseEntrySet.from_pairs(small_cols, [2], [4])
    sym = e.symmetrized(small_cols)
    assert sym.index_set() == {(2, 4), (4, 2)}
    assert sym.values[0] == sym.values[1]
    dense = sym.to_dense()
    assert dense.shape == (small_cols.p, small_cols.p)
    assert len(sym.thresholded(abs(sym.values[0]) + 1)) == 0
    line = next(iter(e.to_csv_lines()))
    assert float(line.split(",")[2]) == e.values[0]


def test_dense_baseline_estimator(small_cols, rng):
    X = rng.standard_normal((30, 6))
    est = DenseThresholdCovariance(mu=0.5).fit(X)
    S = np.cov(X, rowvar=False)
    assert est.large_entries() == set(zip(*np.nonzero(np.abs(S) >= 0.5)))
    assert clone(est).get_params() == {"mu": 0.5, "correlation": False, "center": True}


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 7)), elements=finite))
def test_dense_is_symmetric_and_matches_entries(X):
    cols = center_columns(X)
    S = dense_covariance(cols)
    assert np.array_equal(S, S.T)
    i, j = np.triu_indices(cols.p)
    assert np.array_equal(covariance_entries(cols, i, j), S[i, j])
    assert (np.diag(S) >= 0).all()


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, 9, elements=finite),
    arrays(np.float64, 9, elements=finite),
    st.floats(-10, 10, allow_nan=False),
)
def test_inner_product_bilinear_and_symmetric(x, y, a):
    assert inner_product(x, y) == inner_product(y, x)
    lhs = inner_product(a * x, y)
    assert lhs == pytest.approx(a * inner_product(x, y), rel=1e-9, abs=1e-6)


def test_centered_columns_validates_shape():
    with pytest.raises(DimensionError):
        CenteredColumns(np.ones(3))
    with pytest.raises(DimensionError):
        CenteredColumns(np.ones((3, 1)))
