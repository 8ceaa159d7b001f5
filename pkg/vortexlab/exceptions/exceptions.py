class DomainError(Exception):
    """Base exception for all vortexlab errors.
    Every failure raised by the lattice, group, model and oracle layers derives
    from this class. The CLI maps subclasses to process exit codes.
    """
    exit_code: int = 1

    def __init__(self, message: str | None = None):
        """Initialize domain error with message.
        Args:
            message: Error message describing what went wrong.
        """
        super().__init__(message or "Domain error")


class ConfigurationError(DomainError):
    """Exception raised when an experiment or lattice configuration is invalid."""
    exit_code = 2


class BudgetExceededError(DomainError):
    """Exception raised when an enumeration would exceed its state budget."""
    exit_code = 3


class MissingSeedError(DomainError):
    """Exception raised when a run has no RNG seed."""
    exit_code = 4


class ValidationError(DomainError):
    """Exception raised when operation inputs violate a precondition."""
    pass


class NotFoundError(DomainError):
    """Exception raised when a required group element or object does not exist."""
    pass
