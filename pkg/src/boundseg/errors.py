"""Exception types shared across the package."""


class Error(Exception):
    """Base class for all boundseg errors."""


class IoError(Error):
    """File could not be read or written."""


class FormatError(Error):
    """Malformed text input; carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SpecError(Error):
    """Invalid synthetic-shape specification."""


class TooFewPoints(Error):
    """Cloud too small for the requested operation."""


class KTooLarge(Error):
    """Neighbor count exceeds what the cloud can provide."""


class KTooSmall(Error):
    """Neighbor count below the minimum for the operation."""


class BadIndex(Error):
    """Point index out of range."""


class LengthMismatch(Error):
    """Per-point array does not match the cloud size."""


class NumericError(Error):
    """Non-finite value encountered in a numeric computation."""


class BadLabel(Error):
    """Class label outside the valid range."""


class EmptyMatrix(Error):
    """Metric requested on an empty confusion matrix."""


class VersionError(Error):
    """Checkpoint format version not supported."""


class SchemaError(Error):
    """Checkpoint document is missing or mistypes a required key."""
