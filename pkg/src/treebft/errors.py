"""Exception types shared across the package."""


class TreeBFTError(Exception):
    """Base class for every error raised by this package."""


class KeyNotFound(TreeBFTError):
    pass


class SchemeMismatch(TreeBFTError):
    pass


class ShapeInfeasible(TreeBFTError):
    pass


class InsufficientBins(TreeBFTError):
    pass


class OutOfDomain(TreeBFTError):
    pass


class Infeasible(TreeBFTError):
    pass


class Drained(TreeBFTError):
    """Raised when stepping an empty event queue."""


class CausalityViolation(TreeBFTError):
    """An event was scheduled before the current simulated time."""


class FaultBudgetExceeded(TreeBFTError):
    pass


class AgreementViolation(TreeBFTError):
    """Two different blocks were decided at the same height. Must never happen."""


class ConfigError(TreeBFTError):
    """Scenario validation failure; message names the offending field."""
