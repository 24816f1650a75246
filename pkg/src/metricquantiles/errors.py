"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, CLI arguments, or experiment setup (exit code 2)."""


class NumericError(RuntimeError):
    """A numeric computation failed despite valid inputs (exit code 3)."""


class DatasetError(ValueError):
    """A dataset file could not be parsed.

    Carries the 1-based line and column of the offending token when known.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column
