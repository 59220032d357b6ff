"""Exception types shared across the package."""


class LatticeSFEError(Exception):
    """Base class for all package errors."""


class CapacityError(LatticeSFEError):
    """An enumeration would exceed the configured table-size guard."""


class AmbiguityError(LatticeSFEError):
    """A finite frame is too small to evaluate an infinite-volume quantity."""


class ShapeError(LatticeSFEError, ValueError):
    """Two measures (or a measure and a window) do not live on the same space."""


class DomainError(LatticeSFEError, ValueError):
    """Input outside the domain of an operation (e.g. an infinite diameter)."""


class ConfigError(LatticeSFEError, ValueError):
    """Malformed or unknown experiment configuration."""


class OptimizationError(LatticeSFEError):
    """The convex solver hit its iteration cap before certifying the gap.

    The best objective value and the duality gap reached are kept on the
    exception so callers can still report them.
    """

    def __init__(self, message, best_value=float("nan"), gap=float("nan"), weights=None):
        super().__init__(message)
        self.best_value = best_value
        self.gap = gap
        self.weights = weights
