"""Exception types raised by sparsecov."""


class SparseCovError(Exception):
    """Base class for all sparsecov errors."""


class DimensionError(SparseCovError, ValueError):
    """Array shapes or sample counts are incompatible."""


class DegenerateColumnError(SparseCovError, ValueError):
    """A column has zero variance where a normalization needs it."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column} has zero variance")


class PreconditionError(SparseCovError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class ConfigurationError(SparseCovError, ValueError):
    """An algorithm configuration cannot be executed as requested."""


class FileFormatError(SparseCovError, ValueError):
    """An input file is malformed."""
