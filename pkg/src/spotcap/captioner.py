"""Structured captioning: template assembly, backend driving, response parsing.

The caption request is a fixed analysis template preceded by one line per
timeline event ("From {start}s to {end}s: {caption}"). Responses are
expected back as eight labeled fields ending in the final object-centric
paragraph; the parser tolerates markdown noise and missing middle fields
but insists on the first and last labels.
"""

from __future__ import annotations

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from importlib import resources
from typing import Optional, Sequence

from .errors import CaptionerBackendError, CaptionParseError
from .media import Frame
from .timeline import Timeline

FIELD_LABELS = (
    "HO",
    "HO's attributes",
    "All actions done by HO",
    "All statuses of HO",
    "All other objects interacted with HO",
    "All environments/backgrounds of HO",
    "All events related to HO",
    "Final object-centric paragraph caption",
)

_FIELD_ATTRS = (
    "ho",
    "attributes",
    "actions",
    "statuses",
    "interacting_objects",
    "environments",
    "related_events",
    "final_paragraph",
)

SENTINEL_LINES = (
    "the subjects of all sentences MUST be HO",
    "whose timestamps are very accurate",
)

RETRY_SUFFIX = "Please follow the format:"

CHAT_PREAMBLE = (
    "Please pay attention to the object highlighted (HO) in the video frames "
    "and answer the question about the HO."
)


def load_template() -> str:
    """The verbatim analysis template that follows the event block."""
    return (
        resources.files("spotcap.data").joinpath("cot_template.txt").read_text("utf-8")
    )


@dataclass(frozen=True)
class CotTemplate:
    preamble: str
    field_labels: tuple[str, ...] = FIELD_LABELS
    sentinel_lines: tuple[str, ...] = SENTINEL_LINES

    @classmethod
    def default(cls) -> "CotTemplate":
        return cls(preamble=load_template())


@dataclass(frozen=True)
class ChatTurn:
    role: str  # "user" | "assistant"
    text: str

    def to_json(self) -> dict:
        return {"role": self.role, "text": self.text}


@dataclass(frozen=True)
class StructuredCaption:
    ho: str
    attributes: str
    actions: str
    statuses: str
    interacting_objects: str
    environments: str
    related_events: str
    final_paragraph: str
    raw: str = ""
    warnings: tuple[str, ...] = ()

    def fields(self) -> tuple[str, ...]:
        return tuple(getattr(self, a) for a in _FIELD_ATTRS)

    def to_json(self) -> dict:
        payload = {a: getattr(self, a) for a in _FIELD_ATTRS}
        payload["warnings"] = list(self.warnings)
        return payload


class CaptionerBackend(ABC):
    """Turns (frames, prompt text, chat history) into response text."""

    identity: str = "captioner"

    @abstractmethod
    def complete(
        self,
        frames: Sequence[Frame],
        prompt: str,
        history: Optional[Sequence[ChatTurn]] = None,
    ) -> str:
        ...


# ---------------------------------------------------------------------------
# prompt assembly
# ---------------------------------------------------------------------------

def event_block(timeline: Timeline) -> str:
    """One "From {start}s to {end}s: {caption}" line per event."""
    return "\n".join(
        f"From {e.start:.1f}s to {e.end:.1f}s: {e.caption}" for e in timeline.events
    )


def build_cot_prompt(timeline: Timeline) -> str:
    """Event block followed by the verbatim analysis template."""
    if not timeline.events:
        raise ValueError("timeline has no events")
    return event_block(timeline) + "\n" + load_template()


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------

def _label_pattern(label: str) -> str:
    # tolerate list markers, markdown bold, and fullwidth colons
    return (
        r"^[ \t]*(?:[-*#>]+[ \t]*)?(?:\*\*|__)?"
        + re.escape(label)
        + r"(?:\*\*|__)?[ \t]*[:：](?:\*\*|__)?"
    )


# longest labels first so a shorter label can never claim a longer one's spot
_LABEL_REGEXES = sorted(
    (
        (i, re.compile(_label_pattern(label), re.IGNORECASE | re.MULTILINE))
        for i, label in enumerate(FIELD_LABELS)
    ),
    key=lambda pair: -len(FIELD_LABELS[pair[0]]),
)


def render_structured_caption(caption: StructuredCaption) -> str:
    """Serialize fields in template order; inverse of the parser."""
    return "\n".join(
        f"{label}: {value}" for label, value in zip(FIELD_LABELS, caption.fields())
    )


def parse_structured_caption(response: str, strict: bool = False) -> StructuredCaption:
    """Split a response on the eight field labels.

    Missing middle fields come back empty with a warning; a missing "HO"
    or final-paragraph label fails the parse. ``strict`` additionally
    requires every label, exactly once, in template order.
    """
    matches: list[tuple[int, int, int]] = []  # (start_pos, end_pos, label_index)
    seen: dict[int, int] = {}
    warnings: list[str] = []
    for idx, regex in _LABEL_REGEXES:
        found = list(regex.finditer(response))
        if not found:
            continue
        if len(found) > 1:
            warnings.append(f"label {FIELD_LABELS[idx]!r} appears {len(found)} times; using the first")
        m = found[0]
        if any(start == m.start() for start, _, _ in matches):
            continue
        matches.append((m.start(), m.end(), idx))
        seen[idx] = m.start()

    if 0 not in seen:
        raise CaptionParseError("response has no 'HO' label", raw=response)
    if len(FIELD_LABELS) - 1 not in seen:
        raise CaptionParseError(
            "response has no final-paragraph label", raw=response
        )

    matches.sort(key=lambda t: t[0])
    order = [idx for _, _, idx in matches]
    if order != sorted(order):
        warnings.append("labels appear out of template order")
    if strict and (order != list(range(len(FIELD_LABELS))) or warnings):
        raise CaptionParseError(f"strict parse failed: order={order}", raw=response)

    values = [""] * len(FIELD_LABELS)
    for pos, (start, end, idx) in enumerate(matches):
        next_start = matches[pos + 1][0] if pos + 1 < len(matches) else len(response)
        values[idx] = response[end:next_start].strip()

    for idx, label in enumerate(FIELD_LABELS):
        if idx not in seen:
            warnings.append(f"missing field {label!r}")

    return StructuredCaption(
        **dict(zip(_FIELD_ATTRS, values)),
        raw=response,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# backend driving
# ---------------------------------------------------------------------------

def request_caption(
    frames: Sequence[Frame],
    prompt: str,
    backend: CaptionerBackend,
    history: Optional[Sequence[ChatTurn]] = None,
    retry_limit: int = 2,
    strict: bool = False,
) -> StructuredCaption:
    """Ask the backend for a caption and parse it, retrying malformed output.

    Each retry re-sends the prompt with a corrective suffix. Backend
    transport failures are not retried; they surface immediately.
    """
    if not frames:
        raise ValueError("no frames to caption")
    attempts = retry_limit + 1
    current_prompt = prompt
    retries = 0
    last_error: CaptionParseError | None = None
    for attempt in range(attempts):
        try:
            text = backend.complete(frames, current_prompt, history)
        except Exception as e:
            raise CaptionerBackendError(f"captioner backend failed: {e}") from e
        try:
            caption = parse_structured_caption(text, strict=strict)
        except CaptionParseError as e:
            last_error = e
            retries += 1
            current_prompt = prompt + "\n\n" + RETRY_SUFFIX
            continue
        if attempt > 0:
            caption = replace(
                caption,
                warnings=caption.warnings
                + tuple(
                    f"retry {i + 1}: response did not follow the format"
                    for i in range(attempt)
                ),
            )
        return caption
    raise CaptionParseError(
        f"unparseable after {attempts} attempts: {last_error}",
        raw=last_error.raw if last_error else "",
    )
