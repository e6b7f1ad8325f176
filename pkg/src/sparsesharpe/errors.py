"""Exception hierarchy shared by all modules."""


class SparseSharpeError(Exception):
    """Base class for every error raised by this package."""


class InputError(SparseSharpeError, ValueError):
    """Bad user input: shapes, domains, file contents."""


class DimensionError(InputError):
    pass


class NonFiniteError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class MissingDataError(ParseError):
    pass


class AlignmentError(InputError):
    pass


class EnumerationLimitError(InputError):
    """Exhaustive enumeration would exceed the support budget."""


class ZeroVarianceError(SparseSharpeError, ArithmeticError):
    pass


class ZeroVectorError(SparseSharpeError, ArithmeticError):
    pass


class RuinError(SparseSharpeError, ArithmeticError):
    """A period return of -100% or worse wiped out the wealth."""


class NumericalError(SparseSharpeError, ArithmeticError):
    """An iterate became non-finite."""
