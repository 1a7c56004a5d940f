"""Exception hierarchy shared across the toolkit.

Two broad families map onto the CLI exit codes: bad or malformed input
(exit 1) and numeric failure during computation (exit 2).
"""


class FactorcastError(Exception):
    """Base class for all toolkit errors."""


class InputDataError(FactorcastError):
    """Malformed, missing, or inconsistent input data (CLI exit code 1)."""


class NumericError(FactorcastError):
    """Computation failed or produced non-finite results (CLI exit code 2)."""


class ParseError(InputDataError):
    """CSV text could not be parsed into a monthly panel."""


class AlignmentError(InputDataError):
    """Panels could not be aligned onto the requested date range."""


class MissingColumnError(InputDataError):
    """A required column is absent from a panel or dataset."""


class RankDeficientError(NumericError):
    """Design matrix columns are linearly dependent."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {self.columns}")


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message="non-finite training loss"):
        self.epoch = epoch
        super().__init__(f"{message} at epoch {epoch}")
