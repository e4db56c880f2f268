import numpy as np
import pytest

from sparsecov.linalg import center_columns


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cols(rng):
    X = rng.standard_normal((40, 13))
    X[:, 4] = X[:, 2] + 0.05 * rng.standard_normal(40)
    return center_columns(X)
