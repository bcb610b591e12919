"""Exception hierarchy shared by every odcreg module."""

import numpy as np


class OdcError(Exception):
    """Base class for all errors raised by odcreg."""


class InvalidArgumentError(OdcError, ValueError):
    """An argument is outside the domain of the operation."""


class InvalidConfigError(OdcError, ValueError):
    """A configuration cannot be realised on the given data."""


class SingularMatrixError(OdcError, np.linalg.LinAlgError):
    """A matrix that must be positive definite could not be factored."""


class FormatError(OdcError, ValueError):
    """An input file does not follow the expected CSV layout.

    ``line`` and ``column`` are 1-based and ``None`` when not applicable.
    """

    def __init__(self, message, path=None, line=None, column=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        full = f"{': '.join([', '.join(loc), message])}" if loc else message
        super().__init__(full)
        self.path = path
        self.line = line
        self.column = column


class CorruptModelError(OdcError):
    """A model archive is truncated or fails its checksums."""


class IncompatibleVersionError(OdcError):
    """A model archive was written by an unsupported format version."""
