"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


class NumericError(ArithmeticError):
    """A computation produced NaN/Inf or otherwise diverged."""


class ValidationError(ValueError):
    """Loaded data failed a consistency check."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but the quantity is undefined on it."""
