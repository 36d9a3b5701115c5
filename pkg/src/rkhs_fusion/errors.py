"""Exception types raised by the library."""


class RkhsFusionError(Exception):
    """Base class for all library errors."""


class MixedSpace(RkhsFusionError):
    """Two functions from different Hilbert spaces were combined."""


class SingularSystem(RkhsFusionError):
    """A linear system is numerically singular even after jitter.

    Parameters
    ----------
    message : str
        Description of the failing system.
    iteration : int, optional
        Iteration index when raised from inside a run.
    """

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration


class InsufficientRank(RkhsFusionError):
    """No candidate point increases the rank of the anchor Gram block."""


class WindowNotFilled(RkhsFusionError):
    """The stopping window was requested before it holds ``k_max`` iterates."""


class MaxIterationsExceeded(RkhsFusionError):
    """The iteration cap was hit before the stopping rule fired.

    The partial run is kept on ``result`` so callers can still inspect it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class Diverged(RkhsFusionError):
    """Iterates became non-finite during a run."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ParseError(RkhsFusionError):
    """Malformed configuration text."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ValidationError(RkhsFusionError):
    """A configuration field holds an invalid value."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
