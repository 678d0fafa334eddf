"""Record/replay of backend exchanges for bit-exact pipeline reruns.

Every backend call reduces to a canonical request payload whose digest
keys a recorded response. Frame pixels are hashed separately from the
rest of the request, so digests are stable under JSON field reordering.
Traces persist as JSON lines, one exchange per line, diff-friendly.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .captioner import CaptionerBackend, ChatTurn
from .errors import MalformedRleError, ReplayMissError
from .media import Frame, RleMask, VideoClip, rle_decode, rle_encode
from .segmenter import SegmenterBackend, SegmentResult, VisualPrompt
from .timeline import TemporalBackend


def _canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def digest_payload(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()


def frame_digest(frame: Frame) -> str:
    h = hashlib.sha256()
    h.update(f"{frame.height}x{frame.width}".encode())
    h.update(frame.pixels.tobytes())
    return h.hexdigest()


def segmenter_request_digest(
    frame: Frame, prompt: Optional[VisualPrompt], context: Optional[str]
) -> str:
    return digest_payload(
        {
            "kind": "segment",
            "frame": frame_digest(frame),
            "prompt": prompt.to_json() if prompt is not None else None,
            "context": context,
        }
    )


def temporal_request_digest(clip: VideoClip) -> str:
    return digest_payload(
        {
            "kind": "timeline",
            "fps": clip.fps,
            "frames": [frame_digest(f) for f in clip.frames],
        }
    )


def captioner_request_digest(
    frames: Sequence[Frame], prompt: str, history: Optional[Sequence[ChatTurn]]
) -> str:
    return digest_payload(
        {
            "kind": "caption",
            "frames": [frame_digest(f) for f in frames],
            "prompt": prompt,
            "history": [t.to_json() for t in history] if history else [],
        }
    )


@dataclass
class BackendTrace:
    """Ordered (request digest -> response payload) log for one backend."""

    backend_kind: str  # "segmenter" | "temporal" | "captioner"
    entries: list[tuple[str, dict]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._by_digest = dict(self.entries)

    def add(self, digest: str, response: dict) -> None:
        with self._lock:
            if digest in self._by_digest:
                if self._by_digest[digest] != response:
                    raise ValueError(
                        f"digest {digest[:12]} recorded twice with different responses"
                    )
                return
            self.entries.append((digest, response))
            self._by_digest[digest] = response

    def lookup(self, digest: str) -> Optional[dict]:
        with self._lock:
            return self._by_digest.get(digest)

    def entry_at(self, index: int) -> tuple[str, dict]:
        with self._lock:
            return self.entries[min(index, len(self.entries) - 1)]

    def __len__(self) -> int:
        return len(self.entries)


def new_trace(backend_kind: str, adapter_identity: str) -> BackendTrace:
    return BackendTrace(
        backend_kind=backend_kind,
        meta={
            "adapter": adapter_identity,
            "recorded_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
    )


# ---------------------------------------------------------------------------
# wire payload helpers (response payloads are the adapter wire formats)
# ---------------------------------------------------------------------------

def segment_result_to_payload(result: SegmentResult) -> dict:
    return {
        "rle_mask": rle_encode(result.mask).to_json(),
        "confidence": result.confidence,
        "context_token": result.context,
    }


def segment_result_from_payload(payload: dict) -> SegmentResult:
    try:
        mask = rle_decode(RleMask.from_json(payload["rle_mask"]))
    except KeyError as e:
        raise MalformedRleError(f"segment payload missing {e}") from e
    return SegmentResult(
        mask=mask,
        confidence=float(payload.get("confidence", 1.0)),
        context=payload.get("context_token"),
    )


# ---------------------------------------------------------------------------
# recording wrappers
# ---------------------------------------------------------------------------

class RecordingSegmenter(SegmenterBackend):
    def __init__(self, inner: SegmenterBackend, trace: BackendTrace):
        self._inner = inner
        self.trace = trace
        self.capabilities = inner.capabilities
        self.stateless = inner.stateless
        self.identity = inner.identity
        # replay must re-issue calls with the same prompting pattern
        trace.meta.setdefault("stateless", inner.stateless)

    def segment(self, frame, prompt, context):
        digest = segmenter_request_digest(frame, prompt, context)
        result = self._inner.segment(frame, prompt, context)
        self.trace.add(digest, segment_result_to_payload(result))
        return result


class RecordingTemporal(TemporalBackend):
    def __init__(self, inner: TemporalBackend, trace: BackendTrace):
        self._inner = inner
        self.trace = trace
        self.identity = inner.identity

    def analyze(self, clip):
        digest = temporal_request_digest(clip)
        raw = self._inner.analyze(clip)
        self.trace.add(
            digest,
            {"events": [{"start": s, "end": e, "caption": c} for s, e, c in raw]},
        )
        return raw


class RecordingCaptioner(CaptionerBackend):
    def __init__(self, inner: CaptionerBackend, trace: BackendTrace):
        self._inner = inner
        self.trace = trace
        self.identity = inner.identity

    def complete(self, frames, prompt, history=None):
        digest = captioner_request_digest(frames, prompt, history)
        text = self._inner.complete(frames, prompt, history)
        self.trace.add(digest, {"text": text})
        return text


# ---------------------------------------------------------------------------
# replay wrappers
# ---------------------------------------------------------------------------

class _ReplayBase:
    """Digest lookup with strict-miss or positional lenient fallback."""

    def __init__(self, trace: BackendTrace, strict: bool = True):
        self.trace = trace
        self.strict = strict
        self.warnings: list[str] = []
        self._calls = 0
        self._lock = threading.Lock()

    def _serve(self, digest: str) -> dict:
        with self._lock:
            index = self._calls
            self._calls += 1
        response = self.trace.lookup(digest)
        if response is not None:
            return response
        if self.strict:
            raise ReplayMissError(
                f"{self.trace.backend_kind} request {digest[:12]}… not in trace"
            )
        if len(self.trace) == 0:
            raise ReplayMissError(f"{self.trace.backend_kind} trace is empty")
        fallback_digest, response = self.trace.entry_at(index)
        self.warnings.append(
            f"call {index}: digest {digest[:12]}… missed; served nearest entry "
            f"{fallback_digest[:12]}…"
        )
        return response


class ReplaySegmenter(_ReplayBase, SegmenterBackend):
    capabilities = frozenset({"points", "box", "region"})

    def __init__(self, trace: BackendTrace, strict: bool = True):
        _ReplayBase.__init__(self, trace, strict)
        self.identity = trace.meta.get("adapter", "segmenter")
        self.stateless = bool(trace.meta.get("stateless", False))

    def segment(self, frame, prompt, context):
        payload = self._serve(segmenter_request_digest(frame, prompt, context))
        return segment_result_from_payload(payload)


class ReplayTemporal(_ReplayBase, TemporalBackend):
    def __init__(self, trace: BackendTrace, strict: bool = True):
        _ReplayBase.__init__(self, trace, strict)
        self.identity = trace.meta.get("adapter", "temporal")

    def analyze(self, clip):
        payload = self._serve(temporal_request_digest(clip))
        return [(e["start"], e["end"], e["caption"]) for e in payload["events"]]


class ReplayCaptioner(_ReplayBase, CaptionerBackend):
    def __init__(self, trace: BackendTrace, strict: bool = True):
        _ReplayBase.__init__(self, trace, strict)
        self.identity = trace.meta.get("adapter", "captioner")

    def complete(self, frames, prompt, history=None):
        payload = self._serve(captioner_request_digest(frames, prompt, history))
        return payload["text"]


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_traces(path: str | Path, traces: dict[str, BackendTrace], header: dict) -> None:
    """Write a run bundle: one header line, then every exchange, then a footer.

    ``header`` carries whatever the caller needs to reproduce the run
    (clip source, gesture, config, recorded result bytes).
    """
    lines = [_canonical({"kind": "run-trace", "version": 1, **header})]
    for name in sorted(traces):
        trace = traces[name]
        lines.append(
            _canonical(
                {"kind": "trace-meta", "backend": trace.backend_kind, "meta": trace.meta}
            )
        )
        for digest, response in trace.entries:
            lines.append(
                _canonical(
                    {
                        "kind": "exchange",
                        "backend": trace.backend_kind,
                        "digest": digest,
                        "response": response,
                    }
                )
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_traces(path: str | Path) -> tuple[dict, dict[str, BackendTrace]]:
    """Read a run bundle back into (header, traces-by-kind)."""
    header: dict = {}
    traces: dict[str, BackendTrace] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("kind") == "run-trace":
            header = record
            continue
        if record.get("kind") == "trace-meta":
            kind = record["backend"]
            traces[kind] = BackendTrace(backend_kind=kind, meta=record.get("meta", {}))
            continue
        if record.get("kind") != "exchange":
            continue
        kind = record["backend"]
        if kind not in traces:
            traces[kind] = BackendTrace(backend_kind=kind)
        traces[kind].add(record["digest"], record["response"])
    return header, traces
