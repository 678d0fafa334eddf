"""Scripted and heuristic mock backends.

These make the whole pipeline runnable and testable with no model server:
scripted backends replay fixtures deterministically, mock backends derive
plausible outputs from the prompt and timeline alone.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .captioner import (
    CaptionerBackend,
    ChatTurn,
    StructuredCaption,
    render_structured_caption,
)
from .errors import ScriptExhaustedError
from .media import Frame, Mask, VideoClip
from .segmenter import SegmenterBackend, SegmentResult, VisualPrompt
from .timeline import TemporalBackend


class ScriptedSegmenter(SegmenterBackend):
    """Serves a fixed mask per frame index; can fault on chosen frames."""

    stateless = True
    identity = "scripted-segmenter"

    def __init__(
        self,
        masks: Sequence[Mask],
        fail_frames: Sequence[int] = (),
        capabilities: Sequence[str] = ("points", "box", "region"),
        confidence: float = 1.0,
    ):
        self._masks = list(masks)
        self._fail = set(fail_frames)
        self.capabilities = frozenset(capabilities)
        self._confidence = confidence

    def segment(
        self, frame: Frame, prompt: Optional[VisualPrompt], context: Optional[str]
    ) -> SegmentResult:
        if frame.index in self._fail:
            raise RuntimeError(f"scripted fault on frame {frame.index}")
        if frame.index >= len(self._masks):
            raise ScriptExhaustedError(f"no scripted mask for frame {frame.index}")
        return SegmentResult(mask=self._masks[frame.index], confidence=self._confidence)


class ScriptedTemporal(TemporalBackend):
    """Returns one fixed raw event list, or raises a configured error."""

    identity = "scripted-temporal"

    def __init__(
        self,
        events: Sequence[tuple[float, float, str]],
        error: Optional[Exception] = None,
    ):
        self._events = list(events)
        self._error = error

    def analyze(self, clip: VideoClip) -> list[tuple[float, float, str]]:
        if self._error is not None:
            raise self._error
        return list(self._events)


class ScriptedCaptioner(CaptionerBackend):
    """Serves responses in order; an Exception entry is raised instead."""

    identity = "scripted-captioner"

    def __init__(self, responses: Sequence[str | Exception]):
        self._responses = list(responses)
        self._cursor = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._cursor

    def complete(
        self,
        frames: Sequence[Frame],
        prompt: str,
        history: Optional[Sequence[ChatTurn]] = None,
    ) -> str:
        with self._lock:
            if self._cursor >= len(self._responses):
                raise ScriptExhaustedError(
                    f"scripted captioner exhausted after {self._cursor} calls"
                )
            response = self._responses[self._cursor]
            self._cursor += 1
        if isinstance(response, Exception):
            raise response
        return response


def scripted_backend(kind: str, fixture):
    """Build a scripted backend from a plain fixture.

    kinds: "segmenter" (list of per-frame masks), "temporal" (list of raw
    (start, end, caption) tuples), "captioner" (ordered response texts).
    """
    if kind == "segmenter":
        return ScriptedSegmenter(fixture)
    if kind == "temporal":
        return ScriptedTemporal(fixture)
    if kind == "captioner":
        return ScriptedCaptioner(fixture)
    raise ValueError(f"unknown backend kind {kind!r}")


# ---------------------------------------------------------------------------
# heuristic mocks for live CLI/service use without any model
# ---------------------------------------------------------------------------

class MockSegmenter(SegmenterBackend):
    """Segments whatever region the prompt itself describes, statically.

    A box prompt selects the box; points select a small disk around each
    positive point; a region prompt selects the region. The same mask is
    reported for every frame, which is enough to exercise the pipeline.
    """

    stateless = True
    identity = "mock-segmenter"

    def __init__(self, point_radius: int = 12):
        self._point_radius = point_radius
        self._lock = threading.Lock()
        self._mask: Optional[Mask] = None

    def _mask_from_prompt(self, frame: Frame, prompt: VisualPrompt) -> Mask:
        h, w = frame.height, frame.width
        mask = np.zeros((h, w), dtype=bool)
        if prompt.kind == "box":
            b = prompt.box
            mask[int(b.y_min) : int(b.y_max) + 1, int(b.x_min) : int(b.x_max) + 1] = True
        elif prompt.kind == "region":
            mask = prompt.region.copy()
        else:
            yy, xx = np.ogrid[0:h, 0:w]
            r = self._point_radius
            for p in prompt.points:
                if p.positive:
                    mask |= (xx - p.x) ** 2 + (yy - p.y) ** 2 <= r * r
            for p in prompt.points:
                if not p.positive:
                    mask &= ~((xx - p.x) ** 2 + (yy - p.y) ** 2 <= r * r)
        return mask

    def segment(
        self, frame: Frame, prompt: Optional[VisualPrompt], context: Optional[str]
    ) -> SegmentResult:
        with self._lock:
            if prompt is not None:
                self._mask = self._mask_from_prompt(frame, prompt)
            if self._mask is None:
                raise RuntimeError("mock segmenter has seen no prompt yet")
            return SegmentResult(mask=self._mask.copy(), confidence=0.5)


class MockTemporal(TemporalBackend):
    """Splits the clip into a fixed number of equal events."""

    identity = "mock-temporal"

    def __init__(self, segments: int = 2):
        if segments < 1:
            raise ValueError("segments must be >= 1")
        self._segments = segments

    def analyze(self, clip: VideoClip) -> list[tuple[float, float, str]]:
        d = clip.duration
        n = self._segments
        names = ["first", "second", "third", "fourth", "fifth", "sixth"]
        events = []
        for i in range(n):
            name = names[i] if i < len(names) else f"{i + 1}th"
            events.append((d * i / n, d * (i + 1) / n, f"the {name} part of the video"))
        return events


class MockCaptioner(CaptionerBackend):
    """Emits a template-conformant canned caption, or a canned chat reply."""

    identity = "mock-captioner"

    def complete(
        self,
        frames: Sequence[Frame],
        prompt: str,
        history: Optional[Sequence[ChatTurn]] = None,
    ) -> str:
        if "Please follow the format" in prompt:
            event_lines = [
                line for line in prompt.splitlines() if line.startswith("From ")
            ]
            paragraph = (
                "The HO is a highlighted region of the frame, shown against the "
                "scene. " + " ".join(f"{line.rstrip('.')}." for line in event_lines)
            )
            caption = StructuredCaption(
                ho="the highlighted object",
                attributes="clearly marked by the visual highlight",
                actions="moves with the region selected by the user",
                statuses="visible wherever its mask is non-empty",
                interacting_objects="none detected by the mock backend",
                environments="the synthetic or uploaded scene",
                related_events="; ".join(event_lines) or "the full video",
                final_paragraph=paragraph,
            )
            return render_structured_caption(caption)
        turn = (len(history) // 2 + 1) if history else 1
        return (
            f"The HO stays the focus of this conversation (reply {turn}). "
            "Ask for attributes, actions, or timing for more detail."
        )
