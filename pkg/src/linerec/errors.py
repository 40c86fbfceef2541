"""Exception types raised across the pipeline.

Every stage failure maps to one of these, so the CLI can emit a single
machine-readable reason line and exit 1 instead of leaking tracebacks.
"""


class LineRecError(Exception):
    """Base class for all pipeline errors."""


# --- rendering / synthesis ---

class UnknownCharacterError(LineRecError):
    """A label character is not present in the character dictionary."""


class LabelTooLongError(LineRecError):
    """Label length is outside the renderable range (1..10 characters)."""


# --- manifests and the record store ---

class ManifestUnreadableError(LineRecError):
    """The manifest file cannot be opened or decoded."""


class EmptyManifestError(LineRecError):
    """An operation that needs at least one manifest entry got none."""


class StoreIoError(LineRecError):
    """Record store could not be written or read."""


class StoreCorruptError(StoreIoError):
    """Record store failed its magic/version/CRC validation."""


class DuplicateKeyError(LineRecError):
    """Two records in one store share a key."""


# --- CTC / model math ---

class InfeasibleLabelError(LineRecError):
    """The label cannot be aligned: too few frames for its length."""


class TooLargeError(LineRecError):
    """Brute-force path enumeration would exceed its instance-size cap."""


class ShapeMismatchError(LineRecError):
    """Array arguments have incompatible shapes."""


class NonFiniteGradientError(LineRecError):
    """A gradient contained NaN/Inf; the training run is divergent."""


# --- training / data plumbing ---

class EmptyTrainSetError(LineRecError):
    """The training split selects no samples."""


class DictMismatchError(LineRecError):
    """Labels or checkpoints disagree with the supplied character dictionary."""


# --- evaluation ---

class LengthMismatchError(LineRecError):
    """Prediction and ground-truth lists differ in length."""


class EmptyInputError(LineRecError):
    """An evaluation was requested over zero samples."""


class MissingMetadataError(LineRecError):
    """A stratification scheme needs metadata that was not supplied."""


class SampleCountMismatchError(LineRecError):
    """Before/after reports cover different sample counts."""


# --- inference ---

class UndecodableImageError(LineRecError):
    """Input bytes could not be decoded as an image."""


class CheckpointCorruptError(LineRecError):
    """Checkpoint file failed its magic/version/CRC validation."""
