"""Exception types shared across the package.

Everything raised on purpose derives from CrossviewError so callers can
catch one base class at the CLI/service boundary.
"""


class CrossviewError(Exception):
    """Base class for all deliberate failures."""


class NonPositiveDepth(CrossviewError):
    """A point to be projected lies at or behind the camera plane."""


class UnknownPathKind(CrossviewError):
    """Camera path kind is not one of the supported names."""


class ObjectNotVisible(CrossviewError):
    """The object box cannot be projected in some frame of the pair."""


class InvalidOrder(CrossviewError):
    """DCT order K is outside [1, T]."""


class EmptyKeys(CrossviewError):
    """Keyframe list is empty."""


class UnsortedKeys(CrossviewError):
    """Keyframe indices are not strictly increasing."""


class KeyOutOfRange(CrossviewError):
    """A keyframe index falls outside [0, T-1] or the first key is not 0."""


class ShapeMismatch(CrossviewError):
    """Tensor operands have incompatible shapes."""


class NonFiniteValue(CrossviewError):
    """A forward computation produced NaN or Inf."""


class NotScalarLoss(CrossviewError):
    """backward() was called on a non-scalar tensor."""


class UnknownStream(CrossviewError):
    """drop_condition() got a name that is not a conditioning stream."""


class ConfigMismatch(CrossviewError):
    """Checkpoint or dataset configuration disagrees with the consumer."""


class DepthLookupOutOfRange(CrossviewError):
    """A pixel queried against a depth grid lies outside its window."""


class LengthMismatch(CrossviewError):
    """Paired sequences have different lengths."""


class TooFewScenes(CrossviewError):
    """Not enough scenes to honor the requested split fractions."""


class EmptyDataset(CrossviewError):
    """Training or evaluation was asked to run on zero samples."""
