"""Exception types raised across the package."""


class DeepStackError(Exception):
    """Base class for all package errors."""


class ShapeError(DeepStackError, ValueError):
    """Operand shapes are incompatible."""


class ParameterError(DeepStackError, ValueError):
    """A configuration or hyperparameter value is invalid."""


class RangeError(DeepStackError, ValueError):
    """A value falls outside its permitted range."""


class UnsupportedCombinationError(DeepStackError, ValueError):
    """An activation/loss pairing (or similar) is not supported."""


class NumericError(DeepStackError, ArithmeticError):
    """A computation produced a non-finite value."""


class CapacityError(DeepStackError, ValueError):
    """An exact computation would exceed its enumeration budget."""


class FormatError(DeepStackError, ValueError):
    """A file does not follow the expected format."""


class ParseError(FormatError):
    """A cell in a text file could not be parsed."""


class SelectionError(DeepStackError, RuntimeError):
    """No usable trial exists for a swept parameter."""


class ConfigError(ParameterError):
    """A configuration failed validation; ``problems`` lists every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))
