"""Sub-quadratic detection of the large entries of a sparse covariance matrix."""

from .exceptions import (
    ConfigurationError,
    DegenerateColumnError,
    DimensionError,
    FileFormatError,
    PreconditionError,
    SparseCovError,
)
from .linalg import (
    CenteredColumns,
    DenseThresholdCovariance,
    SparseEntrySet,
    center_columns,
    correlation_normalize,
    covariance_entry,
    dense_covariance,
    inner_product,
)
from .sfft import SFFTCovEstimator, sfft_cov_estimation
from .sparsity import (
    SparsityProfile,
    large_entries,
    multi_run_count,
    required_samples,
    tree_count,
    verify_profile,
)
from .tree import QueryStats, SparseCovTree, construct_forest, find_row, sparse_cov_tree

__all__ = [
    "CenteredColumns",
    "ConfigurationError",
    "DegenerateColumnError",
    "DenseThresholdCovariance",
    "DimensionError",
    "FileFormatError",
    "PreconditionError",
    "QueryStats",
    "SFFTCovEstimator",
    "SparseCovError",
    "SparseCovTree",
    "SparseEntrySet",
    "SparsityProfile",
    "center_columns",
    "construct_forest",
    "correlation_normalize",
    "covariance_entry",
    "dense_covariance",
    "find_row",
    "inner_product",
    "large_entries",
    "multi_run_count",
    "required_samples",
    "sfft_cov_estimation",
    "sparse_cov_tree",
    "tree_count",
    "verify_profile",
]

__version__ = "0.1.0"
