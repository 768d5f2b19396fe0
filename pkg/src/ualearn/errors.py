"""Exception types shared across the library."""


class ShapeError(ValueError):
    """An array's dimensions do not match what the operation requires."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value (NaN or infinity)."""


class ParseError(ValueError):
    """A file could not be parsed; the message names the offending line."""
