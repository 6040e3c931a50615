"""Exception types shared across the package."""


class RecourseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RecourseError, ValueError):
    """An input configuration violates its documented invariants."""


class ShapeError(RecourseError, ValueError):
    """Array dimensions do not match what the operation expects."""


class DivergenceError(RecourseError, ArithmeticError):
    """A training loop produced a non-finite value.

    ``diagnostics`` carries whatever the caller could snapshot at the time.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ContractViolation(RecourseError):
    """A caller broke the pre-condition of an environment operation."""


class InfeasibleGoal(RecourseError):
    """No point in the feature box reaches the requested score."""

    def __init__(self, message, max_score):
        super().__init__(message)
        self.max_score = float(max_score)


class UndefinedMetric(RecourseError, ValueError):
    """A metric was requested on inputs where it has no value."""


class CheckpointFormatError(RecourseError, ValueError):
    """A binary record does not carry the expected header or layout."""
