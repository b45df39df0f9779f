"""Exception types shared across the package."""


class PrefSDMError(Exception):
    """Base class for all package errors."""


class ParseError(PrefSDMError, ValueError):
    """A delimited-text record could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(PrefSDMError, ValueError):
    """Input parsed but violates a data invariant."""


class OutOfRegionError(ValidationError):
    pass


class DegenerateCovariateError(ValidationError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"covariate {column!r} has zero variance")


class SpecificationError(PrefSDMError, ValueError):
    """Model specification is inconsistent with itself or with the supplied data."""


class NumericalError(PrefSDMError, ArithmeticError):
    """A factorization or conditional variance failed even after jitter."""

    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)


class InitializationError(PrefSDMError, RuntimeError):
    pass
