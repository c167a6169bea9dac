"""
Exceptions raised by sigadapt.

Every exception also derives from the closest builtin, so callers that only
know about :py:class:`ValueError` or :py:class:`OSError` keep working.
``exit_code`` is what the command line returns when the exception escapes.
"""
from typing import Optional


class SigAdaptError(Exception):
    """Base class of all sigadapt errors"""

    exit_code = 1


class ValidationError(SigAdaptError, ValueError):
    """Inputs or configuration violate a precondition"""

    exit_code = 1


class NonFiniteError(ValidationError):
    """A NaN or infinity was found at flat index :attr:`index`"""

    def __init__(self, index: int, what: str = "input") -> None:
        super().__init__(f"{what} contains a non-finite value at index {index}")
        self.index = index


class FormatError(ValidationError):
    """A source file does not follow its format"""

    def __init__(
        self, message: str, row: Optional[int] = None, source: Optional[str] = None
    ) -> None:
        where = []
        if source is not None:
            where.append(source)
        if row is not None:
            where.append(f"row {row}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.row = row
        self.source = source


class TruncatedError(FormatError):
    """The payload is shorter than its header declares"""

    def __init__(self, expected: int, actual: int, source: Optional[str] = None) -> None:
        super().__init__(
            f"truncated payload: expected {expected} bytes, got {actual}",
            source=source,
        )
        self.expected = expected
        self.actual = actual


class DegenerateCalibrationError(ValidationError):
    """Digital minimum equals digital maximum, so no physical mapping exists"""


class AdapterMismatchError(ValidationError):
    """The requested adapter cannot represent this instance"""


class OverflowRejectedError(ValidationError):
    """The rendered text would exceed three times the token budget"""


class ArtifactError(SigAdaptError, OSError):
    """An artifact on disk is missing, unreadable or corrupt"""

    exit_code = 2


class NumericError(SigAdaptError, ArithmeticError):
    """A computation produced non-finite values"""

    exit_code = 3
