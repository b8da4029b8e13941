"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Arguments violate a documented precondition."""


class NumericalError(ArithmeticError):
    """An iterative routine failed or produced a non-finite result."""


class DataError(ValueError):
    """A data file is malformed or inconsistent with its model."""
