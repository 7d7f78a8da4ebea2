"""Exception hierarchy.

Every error raised on purpose by the package derives from ``MatchTechError``.
The ``exit_code`` attribute is what the command-line front end returns.
"""


class MatchTechError(Exception):
    exit_code = 1


class MissingInputError(MatchTechError):
    """An input file or upstream artifact does not exist."""

    exit_code = 2


class DependencyError(MissingInputError):
    """An upstream computation that a step relies on was not run."""


class ValidationError(MatchTechError, ValueError):
    """Input parsed but violates a data-model invariant."""

    exit_code = 3


class ParseError(ValidationError):
    """Malformed record; the message names the line or byte offset."""


class ReferentialIntegrityError(ValidationError):
    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class PreconditionError(ValidationError):
    pass


class NotFoundError(MatchTechError, KeyError):
    exit_code = 3

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ParameterError(MatchTechError, ValueError):
    exit_code = 3


class CapacityError(ParameterError):
    pass


class TrainingError(MatchTechError):
    exit_code = 4


class UndefinedValueError(MatchTechError, ArithmeticError):
    """A statistic is undefined for the given input (e.g. mean of nothing)."""

    exit_code = 4


class EventTypeMismatch(MatchTechError, TypeError):
    """An operation received an event of the wrong type."""

    exit_code = 3
