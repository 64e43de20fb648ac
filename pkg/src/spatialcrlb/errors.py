"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An input violates a documented precondition."""


class NumericError(ArithmeticError):
    """A numerical routine failed (non-convergence, singular system)."""


class CapacityError(MemoryError):
    """A requested matrix would exceed the supported size."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
