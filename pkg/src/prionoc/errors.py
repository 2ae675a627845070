"""Exception hierarchy shared by the analytical and simulation layers."""


class PrionocError(Exception):
    """Base class for all package errors."""


class DomainError(PrionocError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class StabilityError(PrionocError, ArithmeticError):
    """A queue or server would be loaded at or beyond saturation.

    ``where`` names the offending queue, rank or condition so callers
    (the CLI in particular) can report it without parsing the message.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class FormatError(PrionocError, ValueError):
    """Malformed input file (traffic matrix, report CSV, config)."""


class ConsistencyError(PrionocError, RuntimeError):
    """Internal data does not cover what a computation needs."""


class DiagnosticsError(PrionocError, ValueError):
    """Not enough samples to compute a requested statistic."""
