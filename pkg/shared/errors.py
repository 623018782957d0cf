from typing import Optional


class NowcastError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class ConfigError(NowcastError):
    exit_code = 2


class DataError(NowcastError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class GapError(DataError):
    def __init__(self, missing_week, path: Optional[str] = None):
        self.week = missing_week
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}missing week {missing_week}")


class RangeError(DataError):
    pass


class DuplicateError(DataError):
    pass


class EmptyIntersectionError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DomainError(DataError, ValueError):
    pass


class MismatchedPanelError(DataError):
    pass


class DimensionMismatchError(DataError, ValueError):
    pass


class NumericalError(NowcastError):
    exit_code = 4


class ConvergenceError(NumericalError):
    pass


class NonPositiveDefiniteError(NumericalError):
    pass


class SingularDesignError(NumericalError):
    pass


class DegenerateBootstrapError(NumericalError):
    pass
