"""Event timelines: backend-produced boundaries, validated and normalized."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

from .errors import TemporalBackendError
from .media import VideoClip

FALLBACK_CAPTION = "the full video"


@dataclass(frozen=True)
class Event:
    start: float
    end: float
    caption: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad event boundaries [{self.start}, {self.end})")
        if not self.caption.strip():
            raise ValueError("event caption is empty")

    def to_json(self) -> dict:
        return {"start": self.start, "end": self.end, "caption": self.caption}


@dataclass(frozen=True)
class Timeline:
    events: tuple[Event, ...]
    duration: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if not self.events:
            raise ValueError("timeline must hold at least one event")
        for e in self.events:
            if e.end > self.duration:
                raise ValueError(f"event ends at {e.end} past duration {self.duration}")

    def to_json(self) -> dict:
        return {"duration": self.duration, "events": [e.to_json() for e in self.events]}

    @classmethod
    def from_json(cls, payload: dict) -> "Timeline":
        return cls(
            events=tuple(
                Event(float(e["start"]), float(e["end"]), str(e["caption"]))
                for e in payload["events"]
            ),
            duration=float(payload["duration"]),
        )


class TemporalBackend(ABC):
    """Returns raw (start, end, caption) tuples for a clip; may be messy."""

    identity: str = "temporal"

    @abstractmethod
    def analyze(self, clip: VideoClip) -> Sequence[tuple[float, float, str]]:
        ...


def whole_clip_timeline(duration: float) -> Timeline:
    return Timeline(events=(Event(0.0, duration, FALLBACK_CAPTION),), duration=duration)


def normalize_events(
    raw: Sequence[tuple[float, float, str]], duration: float
) -> Timeline:
    """Clamp, drop, and sort raw events; insert a whole-clip fallback if none survive.

    Boundaries are clamped to [0, duration]; events that are empty after
    clamping, carry no caption, or have non-finite boundaries are dropped.
    Overlaps are preserved as-is.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    kept: list[Event] = []
    for item in raw:
        try:
            start, end, caption = item
            start = float(start)
            end = float(end)
        except (TypeError, ValueError):
            continue
        if not (math.isfinite(start) and math.isfinite(end)):
            continue
        if not isinstance(caption, str) or not caption.strip():
            continue
        start = min(max(start, 0.0), duration)
        end = min(max(end, 0.0), duration)
        if end <= start:
            continue
        kept.append(Event(start=start, end=end, caption=caption))
    if not kept:
        return whole_clip_timeline(duration)
    kept.sort(key=lambda e: (e.start, e.end))
    return Timeline(events=tuple(kept), duration=duration)


def analyze_timeline(clip: VideoClip, backend: TemporalBackend) -> Timeline:
    """Run the temporal backend over the clip and normalize its output."""
    try:
        raw = backend.analyze(clip)
    except Exception as e:
        raise TemporalBackendError(f"temporal backend failed: {e}") from e
    return normalize_events(raw, clip.duration)


def events_for_time(timeline: Timeline, t: float) -> list[Event]:
    """Events containing time t; end-exclusive except at the clip's end.

    An event ending exactly at the clip duration also contains
    t == duration, so the last instant always maps onto the timeline.
    """
    if not (0 <= t <= timeline.duration):
        raise ValueError(f"t={t} outside [0, {timeline.duration}]")
    hits = []
    for event in timeline.events:
        if event.start <= t < event.end:
            hits.append(event)
        elif t == timeline.duration and event.end == timeline.duration and event.start <= t:
            hits.append(event)
    return hits
