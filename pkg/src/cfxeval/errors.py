"""Exception hierarchy shared across the package.

Exit codes used by the CLI: 1 usage/config, 2 data, 3 numerical.
"""


class CfxError(Exception):
    exit_code = 1


class ConfigError(CfxError):
    """Bad CLI usage or malformed/unknown configuration."""

    exit_code = 1


class DataError(CfxError):
    """Invalid or inconsistent input data."""

    exit_code = 2


class ParseError(DataError):
    """Malformed input file; carries file, line and column context."""

    def __init__(self, path, line, column, message):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {message}")


class NumericalError(CfxError):
    """Non-finite values or failed linear solves."""

    exit_code = 3
