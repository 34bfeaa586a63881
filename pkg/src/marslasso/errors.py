"""Exception types shared across the package."""


class MarsLassoError(Exception):
    """Base class for all errors raised by marslasso."""


class DomainError(MarsLassoError, ValueError):
    """Input lies outside the domain an operation is defined on (e.g. not in [0, 1])."""


class ArgumentError(MarsLassoError, ValueError):
    """Invalid argument combination or shape mismatch."""


class NumericError(MarsLassoError, ArithmeticError):
    """Non-finite values encountered in data or in a user callback."""


class StructuralError(MarsLassoError, ValueError):
    """A lattice or index-set construction came out empty or inconsistent."""


class UnsupportedOrderError(MarsLassoError, ValueError):
    """A difference order beyond what the lattice operators support was requested."""


class DegenerateRangeError(MarsLassoError, ValueError):
    """A covariate column is constant, so min-max scaling is undefined."""

    def __init__(self, column: int):
        super().__init__(f"column {column} is constant; cannot min-max scale it")
        self.column = column
