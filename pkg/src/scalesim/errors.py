"""Exception types raised across the package."""


class ScaleSimError(Exception):
    """Base class for every error raised by scalesim."""


class InvalidScale(ScaleSimError, ValueError):
    pass


class InvalidRatio(ScaleSimError, ValueError):
    pass


class CostDivisionByZero(ScaleSimError, ZeroDivisionError):
    pass


class AbortTooSelective(ScaleSimError, RuntimeError):
    """The acceptance rate is too low for the requested sample to finish."""

    def __init__(self, message, projected_rate=None, attempts=0):
        super().__init__(message)
        self.projected_rate = projected_rate
        self.attempts = attempts


class DegenerateSample(ScaleSimError, ValueError):
    pass


class GridMismatch(ScaleSimError, ValueError):
    pass


class InvalidDensity(ScaleSimError, ValueError):
    pass


class NoSolution(ScaleSimError, RuntimeError):
    pass


class ParseError(ScaleSimError, ValueError):
    """A database file could not be read (strict mode, or a bad header)."""
