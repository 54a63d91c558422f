"""Exception hierarchy shared by the pipeline stages and the CLI exit codes."""


class VolcastError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(VolcastError, ValueError):
    exit_code = 2


class DataError(VolcastError, ValueError):
    exit_code = 3


class NumericalError(VolcastError, ArithmeticError):
    exit_code = 4
