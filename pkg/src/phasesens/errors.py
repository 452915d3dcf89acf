"""Exception types shared across the library."""


class PhasesensError(Exception):
    """Base class for all library errors."""


class IntegrationError(PhasesensError):
    """Adaptive integration could not continue (step underflow, NaN state,
    or step budget exhausted).  Carries the time reached before the abort."""

    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class IterationError(PhasesensError):
    """A discrete map produced a non-finite state.  Carries the step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NotPeriodicError(PhasesensError):
    """No periodic structure found in the observed signal."""


class FitFailureError(PhasesensError):
    """A log-log regression had too few usable samples."""
