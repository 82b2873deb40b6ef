"""Exception hierarchy shared by every module.

The CLI maps :class:`DataError` subclasses to exit code 3 and
:class:`SolverError` subclasses to exit code 4.
"""


class HaarSRError(Exception):
    """Base class for all package errors."""


class DataError(HaarSRError):
    """Bad input data or geometry."""


class DimensionError(DataError, ValueError):
    """Array shapes are incompatible with the requested operation."""


class GeometryError(DataError):
    """Shift geometry leaves no usable common region."""


class UnsupportedConfigurationError(DataError):
    """The set of shifts does not form one of the four solvable cases."""


class SolverError(HaarSRError):
    """A linear system could not be solved."""


class SingularOperatorError(SolverError):
    """A shift operator that must be inverted is singular (zero shift component)."""


class IllPosedConfigurationError(SolverError):
    """Two observations carry no independent information about the unknowns."""


class ZeroMatrixError(SolverError):
    """Every singular value of a system matrix is numerically zero."""


class BlockTooLargeError(SolverError):
    """A vectorized block system would exceed the configured memory budget."""
