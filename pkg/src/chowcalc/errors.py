"""Exception hierarchy shared by all chowcalc modules."""


class ChowError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(ChowError, ValueError):
    pass


class ContextMismatch(ChowError, ValueError):
    """Operands live in different cyclotomic fields."""


class FieldDivisionError(ChowError, ZeroDivisionError):
    pass


class InvalidEmbedding(ChowError, ValueError):
    pass


class ParseError(ChowError, ValueError):
    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at column {position})")
        self.position = position


class UnsupportedShape(ChowError):
    """An operation would leave the factored fractional-linear calculus."""


class InadmissibleError(ChowError):
    """A cycle meets a face in the wrong codimension.

    ``witness`` describes the offending point or component.
    """

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class NotDescendable(ChowError):
    pass


class GradingMismatch(ChowError, TypeError):
    pass


class InvalidParameter(ChowError, ValueError):
    """A relation was requested at an excluded parameter value."""

    def __init__(self, message: str, constraint: str | None = None):
        super().__init__(message)
        self.constraint = constraint or message


class VerificationError(ChowError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class DegeneratePosition(ChowError):
    """The regulator integrand is not in real good position for this cut."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class LedgerError(ChowError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class IncompleteDerivation(LedgerError):
    """conclude was reached with a nonzero remainder."""
