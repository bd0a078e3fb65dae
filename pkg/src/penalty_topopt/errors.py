"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A grid, boundary, material or parameter set violates an invariant."""


class DomainError(ValueError):
    """A design value or interpolation argument lies outside its domain."""


class AssemblyError(ValueError):
    """Global assembly received an invalid coefficient field."""


class SolverError(RuntimeError):
    """A linear solve failed (singular system, breakdown, non-convergence)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
