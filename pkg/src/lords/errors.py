"""Exception types raised across the package."""


class LordsError(Exception):
    """Base class for all package errors."""


class DomainError(LordsError, ValueError):
    """An argument lies outside its mathematical domain."""


class SolverError(LordsError, RuntimeError):
    """A scalar root-finder failed to bracket or converge."""


class DegenerateDoseError(LordsError, ValueError):
    """An outcome probability vanishes at the requested dose."""


class DegenerateGradientError(LordsError, ArithmeticError):
    """Implicit differentiation hit a vanishing derivative."""


class SingularDesignError(LordsError, ArithmeticError):
    """The design information matrix is not positive definite."""


class EmptyWindowError(LordsError, ValueError):
    """A restriction leaves no admissible dose."""

    def __init__(self, message: str, targets=None):
        super().__init__(message)
        self.targets = targets


class NoSafeDoseError(LordsError, ValueError):
    """Every grid dose is above the target toxicity level."""


class ConfigError(LordsError, ValueError):
    """A run configuration failed to parse or validate."""
