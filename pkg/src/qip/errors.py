"""Exception hierarchy for the quadric inclusion package."""


class QipError(Exception):
    """Base class for all package errors."""


class InvalidModel(QipError):
    """Inclusion matrices have the wrong shape or a singular B/C."""


class DegenerateModel(QipError):
    """An SS-DD cannot be turned into an inclusion (X_B or X_C not PD)."""


class NotAnInclusion(QipError):
    """The SS-DD violates the specialness condition."""


class NoWitness(QipError):
    """No contraction maps the input to the output (Cx = 0, y != Ax)."""


class InfiniteWidth(QipError):
    """Cone width is unbounded because X_B is singular."""


class InfeasiblePoint(QipError):
    """A data point can never be included (x = 0, y != 0, no noise)."""


class InfeasibleStart(QipError):
    """No strictly feasible starting point exists."""


class Unscalable(QipError):
    """No finite scaling of the LS uncertainty includes a sample."""


class SchemaError(QipError):
    """Input file has the wrong layout."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
