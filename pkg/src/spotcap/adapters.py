"""HTTP adapters for remote model servers.

Wire contracts (JSON over POST to the adapter address):
  segmenter: {frame_png_base64, prompt, context_token}
             -> {rle_mask, confidence, context_token}
  temporal:  {frames_png_base64, fps, duration} -> {events: [{start, end, caption}]}
  captioner: {frames_png_base64, prompt, history: [{role, text}]} -> {text}
"""

from __future__ import annotations

import base64
from typing import Optional, Sequence

import httpx

from .captioner import CaptionerBackend, ChatTurn
from .errors import CaptionerBackendError, SegmentationFailedError, TemporalBackendError
from .media import Frame, RleMask, VideoClip, frame_to_png, rle_decode
from .pipeline import sample_frames
from .segmenter import SegmenterBackend, SegmentResult, VisualPrompt
from .timeline import TemporalBackend


def _png_b64(frame: Frame) -> str:
    return base64.b64encode(frame_to_png(frame)).decode("ascii")


class _HttpAdapter:
    def __init__(self, url: str, client: Optional[httpx.Client] = None, timeout: float = 60.0):
        self.url = url
        self._client = client or httpx.Client(timeout=timeout)

    def _post(self, payload: dict) -> dict:
        response = self._client.post(self.url, json=payload)
        response.raise_for_status()
        return response.json()


class HttpSegmenter(_HttpAdapter, SegmenterBackend):
    """Remote segmentation server; statefulness is declared, not probed."""

    def __init__(
        self,
        url: str,
        client: Optional[httpx.Client] = None,
        stateless: bool = False,
        capabilities: Sequence[str] = ("points", "box", "region"),
        timeout: float = 60.0,
    ):
        _HttpAdapter.__init__(self, url, client, timeout)
        self.stateless = stateless
        self.capabilities = frozenset(capabilities)
        self.identity = f"http-segmenter:{url}"

    def segment(
        self, frame: Frame, prompt: Optional[VisualPrompt], context: Optional[str]
    ) -> SegmentResult:
        try:
            payload = self._post(
                {
                    "frame_png_base64": _png_b64(frame),
                    "prompt": prompt.to_json() if prompt is not None else None,
                    "context_token": context,
                }
            )
            return SegmentResult(
                mask=rle_decode(RleMask.from_json(payload["rle_mask"])),
                confidence=float(payload.get("confidence", 1.0)),
                context=payload.get("context_token"),
            )
        except httpx.HTTPError as e:
            raise SegmentationFailedError(f"segmenter adapter: {e}") from e


class HttpTemporal(_HttpAdapter, TemporalBackend):
    """Remote event-boundary server; sends a uniform frame sample."""

    def __init__(
        self,
        url: str,
        client: Optional[httpx.Client] = None,
        frame_sample: int = 16,
        timeout: float = 120.0,
    ):
        _HttpAdapter.__init__(self, url, client, timeout)
        self.frame_sample = frame_sample
        self.identity = f"http-temporal:{url}"

    def analyze(self, clip: VideoClip) -> list[tuple[float, float, str]]:
        indices = sample_frames(len(clip), self.frame_sample, 0)
        try:
            payload = self._post(
                {
                    "frames_png_base64": [_png_b64(clip.frames[i]) for i in indices],
                    "fps": clip.fps,
                    "duration": clip.duration,
                }
            )
        except httpx.HTTPError as e:
            raise TemporalBackendError(f"temporal adapter: {e}") from e
        return [
            (float(e["start"]), float(e["end"]), str(e["caption"]))
            for e in payload.get("events", [])
        ]


class HttpCaptioner(_HttpAdapter, CaptionerBackend):
    """Remote multimodal captioning server."""

    def __init__(self, url: str, client: Optional[httpx.Client] = None, timeout: float = 300.0):
        _HttpAdapter.__init__(self, url, client, timeout)
        self.identity = f"http-captioner:{url}"

    def complete(
        self,
        frames: Sequence[Frame],
        prompt: str,
        history: Optional[Sequence[ChatTurn]] = None,
    ) -> str:
        try:
            payload = self._post(
                {
                    "frames_png_base64": [_png_b64(f) for f in frames],
                    "prompt": prompt,
                    "history": [t.to_json() for t in (history or [])],
                }
            )
        except httpx.HTTPError as e:
            raise CaptionerBackendError(f"captioner adapter: {e}") from e
        return str(payload["text"])
