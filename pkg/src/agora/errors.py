"""Exception types shared across the package."""


class AgoraError(Exception):
    """Base class for all package errors."""


class UnknownMember(AgoraError):
    """An operation referenced a member that is not in the ledger/tribe."""


class OutOfRange(AgoraError):
    """A numeric input fell outside its documented range."""


class DimensionMismatch(AgoraError):
    """A vector input did not have the required dimensionality."""


class EmptyToken(AgoraError):
    """A word-vector was requested for an empty token."""


class ShapeMismatch(AgoraError):
    """Model weights or inputs have inconsistent shapes."""


class OddDim(AgoraError):
    """Positional encoding requires an even model dimension."""


class NonFiniteWeights(AgoraError):
    """Model weights contain NaN or infinity."""


class WeightsMissing(AgoraError):
    """A learned allocator was invoked without loaded weights."""


class EmptyDataset(AgoraError):
    """Training was requested on an empty dataset."""


class ChecksumMismatch(AgoraError):
    """A weight file failed its integrity check."""


class VersionMismatch(AgoraError):
    """A weight file was written by an incompatible format version."""


class NoOpenElection(AgoraError):
    """Vote tallying was requested with no election due."""


class ConfigInvalid(AgoraError):
    """A scenario or engine configuration failed validation."""


class CorruptLog(AgoraError):
    """A persistence log failed its hash-chain verification."""


class MalformedEnvelope(AgoraError):
    """A client envelope could not be parsed or failed schema checks."""


class NotJoined(AgoraError):
    """A room action arrived on a connection that has not joined the room."""


class RoomFull(AgoraError):
    """A join was refused because the room is at member capacity."""
