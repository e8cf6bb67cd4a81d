"""Exception categories shared by the library and the command line."""


class RestoreLabError(Exception):
    exit_code = 1
    category = "error"


class ConfigError(RestoreLabError, ValueError):
    """Inconsistent architecture, schedule or command configuration."""

    exit_code = 3
    category = "config"


class InputError(RestoreLabError, ValueError):
    """Bad user data: shapes, files, dataset layout, metric names."""

    exit_code = 2
    category = "input"


class NumericError(RestoreLabError, FloatingPointError):
    """A NaN or Inf showed up where finite values are required."""

    exit_code = 4
    category = "numeric"
