"""Exception hierarchy shared by the engine and the CLI."""


class HybridLatticeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(HybridLatticeError, ValueError):
    """A function was called outside its documented domain."""


class ConfigError(HybridLatticeError, ValueError):
    """A run configuration failed validation.

    ``key`` names the offending configuration key when there is one.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericalError(HybridLatticeError, ArithmeticError):
    """Time evolution produced non-finite numbers."""

    def __init__(self, message, step=None, bond=None):
        super().__init__(message)
        self.step = step
        self.bond = bond


class DegenerateStateError(NumericalError):
    """Every Schmidt coefficient of a split fell below the threshold."""


class ResourceLimitError(HybridLatticeError, MemoryError):
    """A dense construction would exceed the configured dimension cap."""
