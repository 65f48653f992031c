"""Exception types shared across the package."""


class OrthoptError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(OrthoptError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class InputError(OrthoptError, ValueError):
    """An input value violates a precondition (non-finite entries, bad counters, ...)."""


class ConfigError(OrthoptError, ValueError):
    """A configuration value or file is invalid."""


class NumericalError(OrthoptError, ArithmeticError):
    """An iterative numerical procedure failed to converge."""
