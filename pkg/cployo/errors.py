"""
cployo.errors
~~~~~~~~~~~~~

Root of the exception hierarchy.

Every app raises subclasses of :class:`DataError` for bad inputs and of
:class:`NumericError` for numerical failures; the command line maps the
two branches to distinct exit codes.
"""

import logging

log = logging.getLogger(__name__)


class CployoError(Exception):
    """Base class for all errors raised by the detection stack."""

    def __init__(self, message: str) -> None:
        log.error(message)
        super().__init__(message)


class DataError(CployoError):
    """Raised when an input file, array, label or config is unusable."""

    pass


class NumericError(CployoError):
    """Raised when a computation produces non-finite or out-of-tolerance values."""

    pass


class ShapeMismatchError(DataError):
    """Raised when an array or tensor does not have the shape an operation expects."""

    def __init__(self, expected, got, what: str = "") -> None:
        self.expected = tuple(expected) if not isinstance(expected, str) else expected
        self.got = tuple(got) if not isinstance(got, str) else got
        prefix = f"{what} " if what else ""
        super().__init__(f"{prefix}shape mismatch: expected {self.expected}, got {self.got}")
