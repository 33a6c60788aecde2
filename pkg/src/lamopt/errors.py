"""Shared exception types."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""


class DegenerateDiffusionError(DomainError):
    """The diffusion matrix is too degenerate for the requested operation."""


class GeometryError(ValueError):
    """A geometric construction (grid, region partition) is inconsistent."""


class ConsistencyViolationError(RuntimeError):
    """Protocol state diverged from what certainty paging requires."""


class RegimeWarning(UserWarning):
    """An approximation is being evaluated outside its intended regime."""
