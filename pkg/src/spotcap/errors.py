"""Exception types shared across the pipeline."""

from __future__ import annotations


class SpotcapError(Exception):
    """Base class for all spotcap failures."""


class DecodeError(SpotcapError):
    """Video source could not be opened or decoded."""


class EmptyVideoError(SpotcapError):
    """Video source decoded to zero frames."""


class MalformedRleError(SpotcapError):
    """Run-length counts do not describe a mask of the declared size."""


class ShapeMismatchError(SpotcapError):
    """Mask, frame, or masklet dimensions disagree."""


class EmptyMaskError(SpotcapError):
    """Operation requires at least one set pixel."""


class InvalidPromptError(SpotcapError):
    """User gesture cannot be turned into a usable visual prompt."""


class SegmentationFailedError(SpotcapError):
    """Segmenter backend could not produce a mask for the anchor frame."""


class InvalidMeasurementError(SpotcapError):
    """Measurement box has non-positive width or height."""


class EmptyTrackError(SpotcapError):
    """Track stabilization received no measurements at all."""


class TemporalBackendError(SpotcapError):
    """Temporal analysis backend failed or is unreachable."""


class CaptionerBackendError(SpotcapError):
    """Captioner backend failed or is unreachable."""


class CaptionParseError(SpotcapError):
    """Captioner response did not follow the structured template.

    Carries the raw response text so callers can log or retry.
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class DegenerateInteriorError(SpotcapError):
    """Eroded mask interior is empty; color-shift metric undefined."""


class SessionStateError(SpotcapError):
    """Session operation called before its preconditions were met."""


class PipelineError(SpotcapError):
    """A pipeline stage failed; ``stage`` names the failing stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ScriptExhaustedError(SpotcapError):
    """Ordered scripted backend ran out of fixture responses."""


class ReplayMissError(SpotcapError):
    """Strict replay saw a request digest that is not in the trace."""
