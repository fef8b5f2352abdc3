"""Exception types raised across the package."""


class WeakGuideError(Exception):
    """Base class for all errors raised by weakguide."""


class DimensionMismatch(WeakGuideError, ValueError):
    pass


class NonFiniteValue(WeakGuideError, ValueError):
    pass


class Empty(WeakGuideError, ValueError):
    pass


class IndexOutOfRange(WeakGuideError, IndexError):
    pass


class DuplicateIndexWithinItem(WeakGuideError, ValueError):
    pass


class MissingThreshold(WeakGuideError, ValueError):
    pass


class BadInterval(WeakGuideError, ValueError):
    pass


class BadThreshold(WeakGuideError, ValueError):
    pass


class BadBandwidth(WeakGuideError, ValueError):
    pass


class BadK(WeakGuideError, ValueError):
    pass


class KindMismatch(WeakGuideError, ValueError):
    """A guidance item does not match the kind of its set."""


class NonFiniteOracle(WeakGuideError, FloatingPointError):
    """An objective oracle returned a NaN or infinite value or gradient."""


class SingularSystem(WeakGuideError, ValueError):
    pass


class InsufficientDistinctResponses(WeakGuideError, ValueError):
    pass


class RetryBudgetExhausted(WeakGuideError, RuntimeError):
    pass


class InsufficientRows(WeakGuideError, ValueError):
    pass


class InsufficientData(WeakGuideError, ValueError):
    pass


class IoError(WeakGuideError, OSError):
    pass


class ParseError(WeakGuideError, ValueError):
    """A CSV cell could not be parsed; ``row`` is the 1-based data row."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingTarget(WeakGuideError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing target column"


class ConfigError(WeakGuideError, ValueError):
    pass


class ExperimentError(WeakGuideError, RuntimeError):
    """Wraps a failure inside :func:`run_experiment` with trial/method context."""
