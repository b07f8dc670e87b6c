"""Exception types shared across the package.

``DataError`` subclasses describe problems with user-supplied data (bad
input files, triggers that never occur, malformed stream records); the
command line maps them to exit code 2. Everything else is a programming
or configuration error and surfaces as ``ValueError`` / ``FadropError``.
"""


class FadropError(Exception):
    """Base class for all package-specific errors."""


class DataError(FadropError):
    """Input data is unusable; the message names the offending item."""


class BlankCaption(DataError):
    """A caption produced no tokens after normalization."""


class MalformedRecord(DataError):
    """A structured input line is not a usable record."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class EmptyDataset(DataError):
    """No caption records survived loading."""


class TriggerAbsent(DataError):
    """The trigger never occurs in the dataset, so ratios are undefined."""


class StepOutOfRange(FadropError):
    """A schedule was evaluated outside [0, total_steps]."""


class DivergedTraining(FadropError):
    """Training loss became non-finite."""
