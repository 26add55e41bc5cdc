"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class InvalidHandleError(KeyError):
    """Raised when a heap handle does not refer to a live element."""


class ContractViolation(RuntimeError):
    """Raised when a caller breaks a documented usage contract."""


class DegenerateInputError(InvalidInputError):
    """Raised when a construction cannot proceed on the given sample."""


class StaleStructuresError(RuntimeError):
    """Raised when persisted learned structures do not match a config."""
