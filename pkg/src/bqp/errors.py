"""Exception hierarchy.

Errors that signal a violated numeric precondition (divergent Green's
function, non-excessive measure, super-Markovian intensity) derive from
:class:`NumericPreconditionError`; the CLI maps those to exit code 3.
"""


class BQPError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(BQPError, ValueError):
    pass


class EmptyStateSpace(ModelError):
    pass


class RowSumViolation(ModelError):
    def __init__(self, row, total, message=None):
        self.row = row
        self.total = total
        super().__init__(message or f"row {row!r} sums to {total!r}")


class MissingOffspringLaw(ModelError):
    pass


class InvalidOffspringLaw(ModelError):
    pass


class DimensionMismatch(BQPError, ValueError):
    pass


class UnknownState(BQPError, KeyError):
    pass


class NumericPreconditionError(BQPError, ArithmeticError):
    pass


class DivergentGreen(NumericPreconditionError):
    pass


class SolveFailure(NumericPreconditionError):
    pass


class NotNormingRegion(NumericPreconditionError):
    def __init__(self, unreachable, message=None):
        self.unreachable = list(unreachable)
        super().__init__(
            message or f"B is not reachable from states {self.unreachable!r}")


class NotExcessive(NumericPreconditionError):
    pass


class NotSubMarkovian(NumericPreconditionError):
    pass


class ZeroMeanOffspring(NumericPreconditionError):
    pass


class ZeroMassState(NumericPreconditionError):
    pass


class ZeroEntranceMass(NumericPreconditionError):
    pass


class BackwardNotAlmostSurelyFinite(NumericPreconditionError):
    pass


class UnknownLabel(BQPError, KeyError):
    pass


class NoEntrance(BQPError, ValueError):
    pass


class InvalidSpine(BQPError, ValueError):
    pass


class BudgetExceeded(BQPError, RuntimeError):
    pass


class EncodingMismatch(BQPError, ValueError):
    pass


class DecodingError(EncodingMismatch):
    pass


class ParseError(BQPError, ValueError):
    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)
