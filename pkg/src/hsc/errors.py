"""Exception hierarchy.

Errors are grouped by the CLI exit-code class they map to: configuration
problems, input/output problems, and numeric failures.
"""


class HSCError(Exception):
    """Base class for all package errors."""


class ConfigError(HSCError, ValueError):
    pass


class InputError(HSCError, OSError):
    """Missing or unreadable input artifact."""


class NumericError(HSCError, ArithmeticError):
    pass


class DomainError(NumericError):
    """A point lies on or outside the unit disk."""


class DegenerateTriangleError(NumericError):
    pass


class OrientationError(NumericError):
    """A derivative map has non-positive determinant (flipped or collapsed face)."""


class MeshError(HSCError, ValueError):
    pass


class IndexOutOfRangeError(MeshError):
    pass


class DegenerateFaceError(MeshError):
    pass


class DisconnectedMeshError(MeshError):
    pass


class ParamOutsideDiskError(MeshError):
    pass


class ParseError(HSCError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StratificationError(HSCError, ValueError):
    pass
