"""Exception hierarchy shared by every module."""


class InvalidArgument(ValueError):
    """Shapes, counts or parameters violate a precondition."""


class NumericDomainError(ArithmeticError):
    """A value left the domain where the computation is defined (non-PSD, non-finite, singular)."""


class CapabilityError(TypeError):
    """An energy was applied to a measure parameterization it does not support."""


class FlowAborted(RuntimeError):
    """Inner optimization produced a non-finite objective.

    ``last_measure`` holds the last finite iterate and ``trajectory`` the
    partial trajectory up to the failing step, when available.
    """

    def __init__(self, message, last_measure=None, trajectory=None):
        super().__init__(message)
        self.last_measure = last_measure
        self.trajectory = trajectory
