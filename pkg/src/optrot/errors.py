"""Exception types raised across the package."""


class OptrotError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(OptrotError, ValueError):
    pass


class UnsupportedDimensionError(OptrotError, ValueError):
    pass


class InvalidMeshError(OptrotError, ValueError):
    pass


class NumericalInconsistencyError(OptrotError, ArithmeticError):
    """A computed quantity violates an identity it must satisfy."""


class AmbiguousProjectionError(OptrotError, ArithmeticError):
    """The nearest optimal rotation is not unique (cut locus)."""


class IllPosedLoadError(OptrotError, ValueError):
    """The load does not annihilate infinitesimal rigid motions."""


class InsufficientDataError(OptrotError, ValueError):
    pass


class IterationLimitError(OptrotError, RuntimeError):
    """Raised when a solver exhausts its budget.

    The best iterate found so far is kept on ``best`` together with its
    objective value, so callers can still inspect it.
    """

    def __init__(self, message, best=None, value=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.value = value
        self.iterations = iterations


class DegenerateLogarithmWarning(RuntimeWarning):
    """The principal logarithm sits on the cut locus (a rotation angle of pi)."""


class NearDegenerateWarning(RuntimeWarning):
    """A rank decision was made close to its tolerance."""


class EquilibrationWarning(RuntimeWarning):
    """Forces are not equilibrated to the requested tolerance."""
