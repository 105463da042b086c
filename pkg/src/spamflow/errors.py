"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""


class SpamflowError(Exception):
    """Base class for package errors."""


class ConfigError(SpamflowError):
    """Invalid configuration value or unusable combination of options."""


class DataError(SpamflowError):
    """Input data violates a documented precondition."""
