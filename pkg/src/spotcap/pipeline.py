"""Pipeline composition and interactive sessions.

A session owns one clip and at most one selected object. select_object
segments the object, run_pipeline produces the structured caption (the
timeline is computed on the raw clip while highlights render in parallel;
the captioner only ever sees highlighted frames), and chat_turn carries a
multi-round conversation about the highlighted object.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .captioner import (
    CHAT_PREAMBLE,
    CaptionerBackend,
    ChatTurn,
    StructuredCaption,
    build_cot_prompt,
    request_caption,
)
from .errors import (
    CaptionerBackendError,
    PipelineError,
    SessionStateError,
    SpotcapError,
    TemporalBackendError,
)
from .highlight import InjectionStyle, default_style, inject_video
from .media import Frame, RleMask, VideoClip, bbox_of, rle_encode
from .segmenter import (
    Masklet,
    SegmenterBackend,
    VisualPrompt,
    normalize_prompt,
    segment_video,
)
from .timeline import TemporalBackend, Timeline, analyze_timeline, whole_clip_timeline
from .tracking import KalmanParams


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class PipelineConfig:
    injection_style: InjectionStyle = field(default_factory=default_style)
    stabilize: bool = False
    temporal_fallback: bool = True
    captioner_frame_budget: int = 16
    retry_limit: int = 2
    gate_iou: float = 0.3
    kalman_params: KalmanParams = field(default_factory=KalmanParams)
    segmenter_endpoint: Optional[str] = None
    temporal_endpoint: Optional[str] = None
    captioner_endpoint: Optional[str] = None

    def __post_init__(self):
        if self.captioner_frame_budget < 1:
            raise ValueError("captioner_frame_budget must be >= 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")

    def to_json(self) -> dict:
        return {
            "injection_style": self.injection_style.to_json(),
            "stabilize": self.stabilize,
            "temporal_fallback": self.temporal_fallback,
            "captioner_frame_budget": self.captioner_frame_budget,
            "retry_limit": self.retry_limit,
            "gate_iou": self.gate_iou,
            "kalman_params": {
                "process_noise_pos": self.kalman_params.process_noise_pos,
                "process_noise_size": self.kalman_params.process_noise_size,
                "measurement_noise": self.kalman_params.measurement_noise,
                "init_state_var": self.kalman_params.init_state_var,
                "init_velocity_var": self.kalman_params.init_velocity_var,
            },
            "endpoints": {
                "segmenter": self.segmenter_endpoint,
                "temporal": self.temporal_endpoint,
                "captioner": self.captioner_endpoint,
            },
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PipelineConfig":
        kp = payload.get("kalman_params", {})
        endpoints = payload.get("endpoints", {})
        return cls(
            injection_style=InjectionStyle.from_json(payload.get("injection_style", {})),
            stabilize=bool(payload.get("stabilize", False)),
            temporal_fallback=bool(payload.get("temporal_fallback", True)),
            captioner_frame_budget=int(payload.get("captioner_frame_budget", 16)),
            retry_limit=int(payload.get("retry_limit", 2)),
            gate_iou=float(payload.get("gate_iou", 0.3)),
            kalman_params=KalmanParams(**kp) if kp else KalmanParams(),
            segmenter_endpoint=endpoints.get("segmenter"),
            temporal_endpoint=endpoints.get("temporal"),
            captioner_endpoint=endpoints.get("captioner"),
        )

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_json()).encode()).hexdigest()


@dataclass(frozen=True)
class BackendSuite:
    segmenter: SegmenterBackend
    temporal: TemporalBackend
    captioner: CaptionerBackend

    def identities(self) -> dict:
        return {
            "segmenter": self.segmenter.identity,
            "temporal": self.temporal.identity,
            "captioner": self.captioner.identity,
        }


@dataclass(frozen=True)
class CaptionResult:
    structured: StructuredCaption
    timeline: Timeline
    masklet_ref: str
    provenance: dict
    warnings: tuple[str, ...] = ()
    timings: dict = field(default_factory=dict)  # informational, not canonical

    def to_json(self, include_timings: bool = True) -> dict:
        payload = {
            "structured": self.structured.to_json(),
            "timeline": self.timeline.to_json(),
            "masklet_ref": self.masklet_ref,
            "provenance": self.provenance,
            "warnings": list(self.warnings),
        }
        if include_timings:
            payload["timings"] = self.timings
        return payload

    def canonical_bytes(self) -> bytes:
        """Stable byte serialization; wall times are deliberately excluded."""
        return canonical_json(self.to_json(include_timings=False)).encode()


@dataclass(frozen=True)
class MaskletPreview:
    object_id: str
    anchor_frame: int
    anchor_rle: RleMask
    boxes: tuple[Optional[dict], ...]  # per-frame bbox json or None
    warnings: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id,
            "anchor_frame": self.anchor_frame,
            "anchor_rle": self.anchor_rle.to_json(),
            "boxes": list(self.boxes),
            "warnings": list(self.warnings),
        }


def sample_frames(clip_len: int, budget: int, anchor: int) -> list[int]:
    """Uniform frame indices of size <= budget, with the anchor always kept."""
    n = min(budget, clip_len)
    if clip_len == 1:
        picked = {0}
    else:
        picked = {
            int(np.floor(i * (clip_len - 1) / (n - 1) + 0.5)) if n > 1 else 0
            for i in range(n)
        }
    picked.add(anchor)
    return sorted(picked)


class Session:
    """One user's clip, selected object, caption, and chat transcript.

    All operations on a session run under a mutex, so interleaved calls
    from concurrent workers observe consistent state.
    """

    def __init__(
        self,
        suite: BackendSuite,
        clip: Optional[VideoClip] = None,
        config: Optional[PipelineConfig] = None,
        session_id: Optional[str] = None,
    ):
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.suite = suite
        self.config = config or PipelineConfig()
        self.clip = clip
        self.prompt: Optional[VisualPrompt] = None
        self.masklet: Optional[Masklet] = None
        self.timeline: Optional[Timeline] = None
        self.last_result: Optional[CaptionResult] = None
        self.chat_history: list[ChatTurn] = []
        self._chat_frames: Optional[list[Frame]] = None
        self._lock = threading.RLock()

    # -- object selection ---------------------------------------------------

    def attach_clip(self, clip: VideoClip) -> None:
        with self._lock:
            self.clip = clip
            self.prompt = None
            self.masklet = None
            self.timeline = None
            self.last_result = None
            self.chat_history = []
            self._chat_frames = None

    def select_object(self, gesture: dict) -> MaskletPreview:
        """Normalize the gesture, segment the object, reset conversation state."""
        with self._lock:
            if self.clip is None:
                raise SessionStateError("no video attached to this session")
            anchor = int(gesture.get("anchor_frame", 0))
            if not 0 <= anchor < len(self.clip):
                raise ValueError(f"anchor frame {anchor} outside clip of {len(self.clip)} frames")
            prompt = normalize_prompt(gesture, (self.clip.height, self.clip.width))
            masklet = segment_video(
                self.clip,
                prompt,
                self.suite.segmenter,
                stabilize=self.config.stabilize,
                kalman_params=self.config.kalman_params,
                gate_iou=self.config.gate_iou,
            )
            self.prompt = prompt
            self.masklet = masklet
            self.chat_history = []  # a new object starts a new conversation
            self.last_result = None
            self._chat_frames = None
            boxes = []
            for m in masklet.masks:
                b = bbox_of(m)
                boxes.append(b.to_json() if b is not None else None)
            return MaskletPreview(
                object_id=masklet.object_id,
                anchor_frame=masklet.anchor_frame,
                anchor_rle=rle_encode(masklet.masks[masklet.anchor_frame]),
                boxes=tuple(boxes),
                warnings=masklet.warnings,
            )

    # -- captioning ---------------------------------------------------------

    def run_pipeline(self, config: Optional[PipelineConfig] = None) -> CaptionResult:
        """Timeline + highlights (in parallel), then prompt, then caption."""
        with self._lock:
            if self.clip is None or self.masklet is None:
                raise SessionStateError("select an object before captioning")
            config = config or self.config
            warnings: list[str] = []
            timings: dict[str, float] = {}

            def timed(stage, fn):
                t0 = time.perf_counter()
                try:
                    return fn()
                finally:
                    timings[stage] = time.perf_counter() - t0

            with ThreadPoolExecutor(max_workers=2) as pool:
                timeline_future = pool.submit(
                    timed, "timeline", lambda: analyze_timeline(self.clip, self.suite.temporal)
                )
                inject_future = pool.submit(
                    timed,
                    "injection",
                    lambda: inject_video(self.clip, self.masklet, config.injection_style),
                )
                try:
                    timeline = timeline_future.result()
                except TemporalBackendError as e:
                    if not config.temporal_fallback:
                        inject_future.cancel()
                        raise PipelineError("temporal", str(e)) from e
                    timeline = whole_clip_timeline(self.clip.duration)
                    warnings.append(f"temporal backend unavailable; using whole-clip event ({e})")
                except Exception as e:
                    inject_future.cancel()
                    raise PipelineError("temporal", str(e)) from e
                try:
                    injected = inject_future.result()
                except Exception as e:
                    raise PipelineError("injection", str(e)) from e

            try:
                prompt = timed("prompt", lambda: build_cot_prompt(timeline))
            except Exception as e:
                raise PipelineError("prompt", str(e)) from e

            indices = sample_frames(
                len(injected), config.captioner_frame_budget, self.masklet.anchor_frame
            )
            frames = [injected.frames[i] for i in indices]
            try:
                structured = timed(
                    "caption",
                    lambda: request_caption(
                        frames,
                        prompt,
                        self.suite.captioner,
                        retry_limit=config.retry_limit,
                    ),
                )
            except SpotcapError as e:
                raise PipelineError("caption", str(e)) from e

            result = CaptionResult(
                structured=structured,
                timeline=timeline,
                masklet_ref=self.masklet.object_id,
                provenance={
                    "backends": self.suite.identities(),
                    "config_hash": config.config_hash(),
                },
                warnings=tuple(warnings),
                timings=timings,
            )
            self.timeline = timeline
            self.last_result = result
            self._chat_frames = frames
            return result

    # -- chat ---------------------------------------------------------------

    def chat_turn(self, user_message: str) -> str:
        """One conversational round about the highlighted object.

        The backend sees the same highlighted frame sample as the caption
        request, plus the full history. History is only appended when the
        backend call succeeds.
        """
        with self._lock:
            if self.masklet is None or self.last_result is None or self._chat_frames is None:
                raise SessionStateError("run the caption pipeline before chatting")
            prompt = f"{CHAT_PREAMBLE}\n\n{user_message}"
            history = list(self.chat_history)
            try:
                reply = self.suite.captioner.complete(self._chat_frames, prompt, history)
            except Exception as e:
                raise CaptionerBackendError(f"chat backend failed: {e}") from e
            self.chat_history.append(ChatTurn(role="user", text=user_message))
            self.chat_history.append(ChatTurn(role="assistant", text=reply))
            return reply


class SessionStore:
    """Thread-safe registry of live sessions."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(
        self,
        suite: BackendSuite,
        clip: Optional[VideoClip] = None,
        config: Optional[PipelineConfig] = None,
    ) -> Session:
        session = Session(suite=suite, clip=clip, config=config)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Optional[Session]:
        with self._lock:
            return self._sessions.get(session_id)
