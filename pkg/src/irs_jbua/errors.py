"""Exception hierarchy shared by all modules."""


class IrsError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(IrsError, ValueError):
    pass


class DegenerateGeometryError(IrsError, ValueError):
    """Two entities that must be apart share a position."""


class SingularChannelError(IrsError):
    """The stacked channel matrix is (numerically) rank deficient.

    Callers running Monte-Carlo trials treat this as a signal to resample
    the realization.
    """

    def __init__(self, message: str, condition_number: float = float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class InvalidAssignmentError(IrsError, ValueError):
    pass


class InfeasibleMatchingError(IrsError, ValueError):
    pass


class SizeGuardError(IrsError):
    """Exhaustive enumeration would exceed the configured limit."""
