"""Exception hierarchy.

Every error raised by the package derives from :class:`PanoVOError`.  The
two intermediate classes decide the CLI exit code: :class:`DataError`
maps to 2 and :class:`TrackingError` to 3.
"""


class PanoVOError(Exception):
    pass


class DataError(PanoVOError):
    """Malformed or inconsistent input data."""


class TrackingError(PanoVOError):
    """The estimator could not produce a pose."""


# geometry
class NearSingularRotation(PanoVOError):
    pass


class NonPositiveDepth(PanoVOError):
    pass


class BehindCamera(PanoVOError):
    pass


class OutOfBounds(PanoVOError):
    pass


# rig / io
class ParseError(DataError):
    pass


class WrongCameraCount(DataError):
    pass


class NonIdentityBodyFrame(DataError):
    pass


class IndexOutOfRange(PanoVOError):
    pass


# association
class EmptyScan(DataError):
    pass


# tracking / window
class InsufficientResiduals(TrackingError):
    pass


class Diverged(TrackingError):
    pass


class WindowTooSmall(PanoVOError):
    pass


class WindowNotFull(PanoVOError):
    pass


# simworld
class BadFrameCount(PanoVOError):
    pass


# evaluation
class DegenerateAlignment(DataError):
    pass


class NoAssociations(DataError):
    pass


# pipeline
class MissingView(DataError):
    pass


class MissingScan(DataError):
    pass


class NonMonotoneTimestamps(DataError):
    pass


class EmptyDataset(DataError):
    pass


class TrackingLost(TrackingError):
    """Tracking failed mid-sequence.

    ``frame_index`` names the failing frame and ``trajectory`` holds the
    poses estimated before the failure.
    """

    def __init__(self, message, frame_index=None, trajectory=None):
        super().__init__(message)
        self.frame_index = frame_index
        self.trajectory = trajectory
