from vortexlab.exceptions.exceptions import (
    BudgetExceededError,
    ConfigurationError,
    DomainError,
    MissingSeedError,
    NotFoundError,
    ValidationError,
)

__all__ = [
    "BudgetExceededError",
    "ConfigurationError",
    "DomainError",
    "MissingSeedError",
    "NotFoundError",
    "ValidationError",
]
