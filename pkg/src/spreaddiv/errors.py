"""Exception types raised across the package."""


class SpreadDivError(Exception):
    """Base class for all package errors."""


class ValidationError(SpreadDivError, ValueError):
    """An input violated a documented precondition."""


class ConvergenceError(SpreadDivError, RuntimeError):
    """An iterative routine hit its iteration cap.

    ``detail`` carries whatever diagnostic the routine had at the point it
    gave up (final residual, last iterate, ...).
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class TrainingDiverged(SpreadDivError, RuntimeError):
    """Training produced a non-finite or exploding objective.

    Attributes
    ----------
    trace : list of float
        Loss values recorded up to the failure.
    checkpoint : object
        Last parameter state for which the loss was finite.
    """

    def __init__(self, message, trace=None, checkpoint=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.checkpoint = checkpoint


class UnsupportedCombination(ValidationError):
    """A bound variant was requested for a spread family it does not fit."""
