"""Exception types shared across the package."""


class XlirError(Exception):
    """Base class for all engine errors."""


class FormatError(XlirError):
    """A file or record does not match its declared format."""


class ValidationError(XlirError):
    """A value violates a documented invariant or precondition."""
