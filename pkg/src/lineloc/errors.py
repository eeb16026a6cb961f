"""Exception hierarchy shared across the localization pipeline.

Two families matter to callers: DataError (bad files / violated invariants,
CLI exit code 2) and AlgorithmError (a stage could not produce a result,
CLI exit code 3). Everything derives from LinelocError.
"""


class LinelocError(Exception):
    """Base class for all package-specific errors."""


class DataError(LinelocError):
    """Malformed or invariant-violating input data."""


class AlgorithmError(LinelocError):
    """A pipeline stage could not produce a usable result."""


class PointAtCameraCenter(LinelocError):
    """A 3D point coincides with the camera center; projection undefined."""


class DegenerateProjection(LinelocError):
    """Projected endpoints are collinear/antipodal; no arc can be formed."""


class EmptyAfterFilter(AlgorithmError):
    """Length filtering removed every 3D segment."""


class TooFewLines(AlgorithmError):
    """Not enough 2D lines to vote for vanishing points."""


class TooFewDirections(AlgorithmError):
    """Voting produced fewer principal directions than required."""


class DegenerateConfiguration(LinelocError):
    """Rank-deficient direction triplet; rotation alignment is ill-posed."""


class NoFeasibleRotation(AlgorithmError):
    """No rotation hypothesis survived the alignment-error threshold."""


class NoCandidates(AlgorithmError):
    """Pose ranking was invoked with an empty rotation or translation pool."""


class EmptyQuery(AlgorithmError):
    """The query contains no line segments."""


class TooFewMatches(AlgorithmError):
    """Fewer than three 2D-3D correspondences supplied to refinement."""


class CameraOnLine(AlgorithmError):
    """A map segment passes through the camera center; rendering impossible."""


class ParseError(DataError):
    """A file could not be parsed; message names the offending field."""


class InvariantViolation(DataError):
    """Parsed data violates a type invariant; message names the field."""
