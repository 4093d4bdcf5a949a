"""Exception hierarchy shared by every fracqueue module."""


class FracQueueError(Exception):
    """Base class; ``code`` is the machine-readable tag the CLI emits."""

    code = "error"


class ParameterError(FracQueueError, ValueError):
    code = "parameter_error"


class UnsupportedParameterError(ParameterError):
    """Valid parameters the closed forms do not cover (e.g. lambda == mu)."""

    code = "unsupported_parameter"


class NoSteadyStateError(ParameterError):
    code = "no_steady_state"


class ConvergenceError(FracQueueError, ArithmeticError):
    """A series or iteration hit its budget before meeting its tolerance.

    ``partial`` holds the value reached and ``n_terms`` the work spent, so
    callers can decide whether the partial result is still usable.
    """

    code = "non_convergence"

    def __init__(self, message, partial=None, n_terms=None):
        super().__init__(message)
        self.partial = partial
        self.n_terms = n_terms


class InsufficientDataError(FracQueueError, ValueError):
    code = "insufficient_data"


class DegenerateDataError(FracQueueError, ValueError):
    code = "degenerate_data"


class IllConditionedError(FracQueueError, ArithmeticError):
    code = "ill_conditioned"


class DataFormatError(FracQueueError, ValueError):
    """Malformed input file; ``line`` is 1-based and counts the header."""

    code = "data_format"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
