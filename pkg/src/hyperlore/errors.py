"""Exception hierarchy shared by every module."""


class HyperloreError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(HyperloreError, ValueError):
    """Shapes or lengths of the inputs do not agree."""


class ConstraintViolationError(HyperloreError, ValueError):
    """A point does not lie on the manifold it claims to belong to."""


class TangencyError(ConstraintViolationError):
    """A direction is not a tangent vector at its base point."""


class SingularityError(HyperloreError, ArithmeticError):
    """A matrix that must have full column rank is rank deficient."""


class NumericError(HyperloreError, ArithmeticError):
    """Non-finite values appeared in an input or during a computation."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


class ParseError(HyperloreError, ValueError):
    """A text file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ChecksumError(HyperloreError, ValueError):
    """A persisted factorization bundle does not match its manifest."""


class EmptyInputError(HyperloreError, ValueError):
    """An input that must contain data is empty."""
