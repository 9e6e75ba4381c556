"""Exception hierarchy shared by all modules."""


class AlesimError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(AlesimError, ValueError):
    pass


class UnivalenceError(InvalidParameterError):
    """A spread-out parameter gamma lies below the univalence threshold."""


class DomainError(AlesimError, ValueError):
    """A point was supplied outside the closed exterior disk."""


class SingularityError(AlesimError, ArithmeticError):
    pass


class ExtractionError(AlesimError, ArithmeticError):
    """Non-finite samples met while extracting Laurent coefficients."""


class TruncationError(AlesimError, ValueError):
    pass


class InsufficientEnsembleError(AlesimError, ValueError):
    pass


class RunHealthError(AlesimError, RuntimeError):
    """Raised when a run leaves the double precision trust region.

    ``step`` is the index of the particle that could not be added and
    ``state`` (when available) is the last healthy cluster state.
    """

    def __init__(self, message, step=None, state=None):
        super().__init__(message)
        self.step = step
        self.state = state
