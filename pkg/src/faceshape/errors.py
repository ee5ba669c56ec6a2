"""Exception hierarchy shared across the library.

Everything raised on purpose derives from FaceShapeError so callers (and the
CLI) can distinguish bad input from genuine bugs.
"""


class FaceShapeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(FaceShapeError):
    """Array shapes are inconsistent with each other or with a basis."""


class DegenerateGeometryError(FaceShapeError):
    """Pose estimation cannot proceed (rank-deficient landmark geometry)."""


class SolverError(FaceShapeError):
    """A linear solve failed; reported instead of returning junk."""


class SchemaError(FaceShapeError):
    """A document on disk is malformed or violates a declared invariant."""


class BasisMismatchError(FaceShapeError):
    """A template is bound to a different basis than the one supplied."""


class EnrollmentError(FaceShapeError):
    """Template enrollment preconditions are not met."""
