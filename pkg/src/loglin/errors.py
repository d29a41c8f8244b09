"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ParseError(DomainError):
    """Malformed input file; ``row`` is the 1-based data row, if known."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class NumericError(ArithmeticError):
    """A numerical procedure failed to converge or overflowed.

    Extra keyword arguments (last iterate, gradient norm, model formula, ...)
    are kept as attributes for diagnostics.
    """

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info
        for key, value in info.items():
            setattr(self, key, value)
