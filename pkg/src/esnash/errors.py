"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Raised for malformed inputs: wrong dimensions, bad parameters, bad config."""


class NumericalDomainError(ArithmeticError):
    """Raised when a computation produces non-finite values."""


class DivergenceError(NumericalDomainError):
    """Raised when a plant state leaves the divergence bound."""


class PlantSolveError(RuntimeError):
    """Raised when the quasi-steady state of the plant cannot be found."""
