"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericError`` -> 3.
"""


class DataError(ValueError):
    """Malformed or inconsistent input data (graphs, corpora, checkpoints)."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during optimization or training."""


class SizeLimitError(DataError):
    """An instance is larger than the exact search is allowed to handle."""
