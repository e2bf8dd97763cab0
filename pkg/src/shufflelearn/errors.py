"""Exception types shared across the package."""


class DataError(Exception):
    """Input data is structurally invalid or insufficient (CLI exit code 2)."""
