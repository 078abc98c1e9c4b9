"""Exception types shared across the package."""


class SingularMatrixError(ArithmeticError):
    """A factorisation hit a zero (or numerically unusable) pivot."""


class MatrixMarketError(ValueError):
    """A Matrix Market file could not be parsed.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
