"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of a numerical routine (e.g. a non-finite margin)."""


class ConfigError(ValueError):
    """Missing or inconsistent configuration."""


class DegenerateDatasetError(ValueError):
    """Dataset too small for the requested operation."""


class ConvergenceError(RuntimeError):
    """Solver exhausted its iteration budget before meeting the tolerance."""

    def __init__(self, message, residual=None, fold=None):
        super().__init__(message)
        self.residual = residual
        self.fold = fold
