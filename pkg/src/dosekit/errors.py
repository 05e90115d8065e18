"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class DosekitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(DosekitError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(DosekitError):
    """Malformed, missing, or inconsistent input data."""

    exit_code = 3


class NumericalError(DosekitError):
    """A numerical routine failed to converge or produced invalid values."""

    exit_code = 4
