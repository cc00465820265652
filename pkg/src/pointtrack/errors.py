"""Exception hierarchy shared across the toolkit."""


class TrackingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TrackingError):
    """A caller-supplied value violates an operation's preconditions
    (non-finite coordinates, out-of-range probabilities, shape mismatches, ...)."""


class DegenerateTransformError(TrackingError):
    """The linear part of an affine transform is (near-)singular."""


class NoMotionEstimateError(TrackingError):
    """Camera-motion estimation failed (too few correspondences or no
    consensus); callers fall back to the identity transform."""


class ValidationUnavailableError(TrackingError):
    """No classification context exists for a track this frame; the track
    stays pending and no score is recorded."""


class SequencingError(TrackingError):
    """Frame inputs arrived out of order or with gaps."""


class ParseError(TrackingError):
    """A text input file is malformed. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(TrackingError):
    """A binary feature-map file is malformed or truncated."""


class ConfigError(TrackingError):
    """A configuration value or file is invalid."""
