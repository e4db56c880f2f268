import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sparsecov.exceptions import PreconditionError
from sparsecov.linalg import SparseEntrySet
from sparsecov.sparsity import (
    SparsityProfile,
    gaussian_psi2_norm,
    group_test_tree_count,
    hard_threshold,
    large_entries,
    large_entries_row,
    multi_run_count,
    next_power_of_two,
    required_samples,
    row_residuals,
    sample_margin,
    tree_count,
    verify_profile,
)


def test_large_entries_inclusive():
    A = np.array([[1.0, -0.5], [0.49999, 2.0]])
    assert large_entries(A, 0.5) == {(0, 0), (0, 1), (1, 1)}
    np.testing.assert_array_equal(large_entries_row(A[1], 0.5), [1])
    assert large_entries(SparseEntrySet([0, 1], [1, 1], [-0.5, 0.1], 2), 0.5) == {(0, 1)}


def test_hard_threshold():
    np.testing.assert_array_equal(hard_threshold([0.3, -0.7, 0.5], 0.5), [0.0, -0.7, 0.5])


def test_verify_profile_report():
    A = np.array([[2.0, 0.3, 0.1], [0.3, 2.0, 0.0], [0.1, 0.0, 2.0]])
    rep = verify_profile(A, SparsityProfile(1, 1.0, 0.35))
    assert rep.is_r_mu_sparse and rep.is_full_profile and rep.worst_row is None
    rep = verify_profile(A, SparsityProfile(1, 1.0, 0.2))
    assert rep.is_r_mu_sparse and not rep.is_full_profile
    assert rep.worst_row == 0
    assert rep.worst_residual == pytest.approx(math.sqrt(0.1))
    rep = verify_profile(np.full((3, 3), 1.0), SparsityProfile(2, 1.0, 0.0))
    assert not rep.is_r_mu_sparse and rep.max_row_count == 3
    assert "is_full_profile=False" in rep.lines()


def test_profile_validation():
    with pytest.raises(PreconditionError):
        SparsityProfile(-1, 1.0)
    with pytest.raises(PreconditionError):
        SparsityProfile(1, 0.0)
    with pytest.raises(PreconditionError):
        SparsityProfile(1, 1.0, q=1)
    with pytest.warns(UserWarning):
        SparsityProfile(1, 1.0, 0.5)


def test_sample_margin_examples():
    assert sample_margin(SparsityProfile(1, 1.0, 0.0), 2, 1.0) == (0.25, "second")
    t, which = sample_margin(SparsityProfile(4, 1.0, 0.2), 104, 1.0)
    assert t == pytest.approx(0.6 / 21) and which == "first"
    t, which = sample_margin(SparsityProfile(1, 1.0, 0.0), 2, 0.1)
    assert t == pytest.approx(0.01) and which == "third"


def test_required_samples_formula():
    rep = required_samples(SparsityProfile(1, 1.0, 0.0), 2, 1.0)
    assert rep.n_required == math.ceil(8 / 0.0625 * math.log(54 * 4)) + 1
    assert rep.C == 8.0 and "binding_term=second" in rep.lines()
    with pytest.warns(UserWarning), pytest.raises(PreconditionError):
        required_samples(SparsityProfile(1, 1.0, 0.5), 10, 1.0)
    with pytest.raises(PreconditionError):
        required_samples(SparsityProfile(5, 1.0, 0.0), 3, 1.0)


def test_gaussian_psi2():
    # E|Y| for Y ~ N(0, s^2) is s sqrt(2/pi); higher moments give smaller ratios
    assert gaussian_psi2_norm(4.0) == pytest.approx(2 * math.sqrt(2 / math.pi))


def test_counts():
    assert multi_run_count(27) == 4
    assert multi_run_count(1) == 1
    assert multi_run_count(1000) == 8
    assert tree_count(8, 1) == 444
    assert tree_count(2, 1) == 222
    assert tree_count(5, 1) == tree_count(8, 1)
    assert group_test_tree_count(0.05) == 192
    assert next_power_of_two(1) == 1 and next_power_of_two(5) == 8 and next_power_of_two(8) == 8


@given(st.integers(1, 10**12))
def test_multi_run_count_is_minimal(p):
    m = multi_run_count(p)
    assert 3**m >= 3 * p
    assert 3 ** (m - 1) < 3 * p


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.floats(-3, 3)),
    st.floats(0.01, 2.0),
)
def test_threshold_and_residual_partition(A, mu):
    counts, resid = row_residuals(A, mu)
    T = np.apply_along_axis(hard_threshold, 1, A, mu)
    assert (np.count_nonzero(T, axis=1) <= counts).all()
    np.testing.assert_allclose(resid**2 + (T**2).sum(axis=1), (A**2).sum(axis=1), rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(np.apply_along_axis(hard_threshold, 1, T, mu), T)
