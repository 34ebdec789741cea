"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """Raised when an exact computation exceeds its state-space budget."""

    def __init__(self, message, *, parameter=None, limit=None):
        super().__init__(message)
        self.parameter = parameter
        self.limit = limit


class DomainError(ValueError):
    """A parameter lies outside the domain where a formula is valid."""


class InvariantError(AssertionError):
    """A checked identity or inequality failed at run time."""
