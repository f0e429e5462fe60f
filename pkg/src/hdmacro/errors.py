"""Exception hierarchy.

The four top-level families map onto CLI exit codes (see ``hdmacro.cli``).
"""


class HdMacroError(Exception):
    """Base class for all package errors."""


class ConfigError(HdMacroError):
    """Invalid configuration or arguments."""


class DataError(HdMacroError):
    """Malformed or unusable input data."""


class NumericalError(HdMacroError):
    """A numerical routine could not produce a finite answer."""


class StoreError(HdMacroError):
    """Forecast store could not be written or read."""


# data
class PanelFormatError(DataError):
    pass


class DuplicateIdError(PanelFormatError):
    pass


class DateGapError(PanelFormatError):
    pass


class TransformDomainError(DataError):
    def __init__(self, column, date, value):
        self.column = column
        self.date = date
        self.value = value
        super().__init__(
            f"non-positive value {value!r} under a log transform in column {column!r} at {date}"
        )


class EmptyDesignError(DataError):
    pass


class InsufficientHistoryError(DataError):
    pass


class AlignmentError(DataError):
    pass


# numerical
class SingularDesignError(NumericalError):
    pass


class SweepError(NumericalError):
    def __init__(self, step, message=""):
        self.step = step
        super().__init__(f"non-finite value in Gibbs step {step!r}" + (f": {message}" if message else ""))


class ZeroVarianceError(NumericalError):
    pass


# store
class CorruptStoreError(StoreError):
    pass


class RunAbortedError(HdMacroError):
    """Too many per-cell failures in a rolling run."""
