"""Exception types shared across the pipeline.

The CLI maps ValidationError (and subclasses) to exit code 1 and
ComputeError to exit code 2.
"""


class VegriskError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(VegriskError):
    """Bad input: malformed files, out-of-range values, config mistakes."""


class SchemaError(ValidationError):
    """A CSV is missing required columns."""


class RowError(ValidationError):
    """A CSV data row failed to parse or violated a field invariant."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ImputationError(ValidationError):
    """A missing value has no prior data to impute from."""


class ComputeError(VegriskError):
    """Numeric failure at run time."""


class DivergenceError(ComputeError):
    """Training loss became non-finite or failed to decrease."""
