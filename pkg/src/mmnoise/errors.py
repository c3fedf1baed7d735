"""Exception hierarchy shared across the package."""


class MMNoiseError(Exception):
    """Base class for all package errors."""


class DataError(MMNoiseError):
    """Input data could not be parsed or failed validation."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateKeyError(DataError):
    pass


class OrderingError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DomainError(MMNoiseError, ValueError):
    """A numerical argument lies outside the model's domain."""


class ArbitrageError(DomainError):
    """Lattice parameters violate d < r*dt < u."""


class DegenerateDriftError(DomainError):
    pass


class ConvergenceError(MMNoiseError):
    """An optimizer exhausted its budget. ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateVarianceError(ConvergenceError):
    pass
