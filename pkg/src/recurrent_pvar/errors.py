"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RecurrentPvarError(Exception):
    exit_code = 1


class InputFormatError(RecurrentPvarError, ValueError):
    """Malformed or inconsistent input data (files, subjects, designs)."""

    exit_code = 3


class RiskSetError(RecurrentPvarError, ArithmeticError):
    """The estimated censoring survivor vanished where it is needed."""

    exit_code = 4


class StudyPreconditionError(RecurrentPvarError, ValueError):
    exit_code = 5
