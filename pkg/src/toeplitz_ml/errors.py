"""Exception hierarchy shared by all modules."""


class ToeplitzMLError(Exception):
    """Base class for errors raised by this package."""


class DomainError(ToeplitzMLError, ValueError):
    """An input is outside the domain of the operation (e.g. not positive definite)."""


class CapacityError(DomainError):
    """The requested problem is too large for an exhaustive method."""


class NumericalError(ToeplitzMLError, ArithmeticError):
    """A numerical routine failed (non-convergence, bracketing failure, ...)."""


class DegeneracyError(NumericalError):
    """Eigenvalues are too close for first-order perturbation theory."""
