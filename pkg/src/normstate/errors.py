"""Exception hierarchy shared by all normstate modules."""


class NormStateError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(NormStateError, ValueError):
    """Invalid grid, parameter or configuration values."""


class ResolutionError(NormStateError):
    """The requested quantity cannot be resolved on the given grid."""


class SolverFailure(NormStateError):
    """An iterative or shooting procedure did not find what it was looking for."""


class DomainError(NormStateError, ValueError):
    """Arguments are outside the domain where the quantity is defined."""


class RegimeError(NormStateError):
    """Parameters are outside the regime required by an operation."""


class WindowError(NormStateError):
    """No sign change of the fiber derivative was found in the search window."""
