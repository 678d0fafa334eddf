"""HTTP gateway exposing the captioning pipeline.

Routes:
  POST /videos                     upload a video file      -> {clip_id}
  POST /sessions                   {clip_id}                -> {session_id}
  POST /sessions/{id}/prompt       gesture record           -> masklet preview
  POST /sessions/{id}/caption      optional config override -> caption result
  POST /sessions/{id}/chat         {message}                -> {reply}
  GET  /sessions/{id}/frames/{t}   ?style=kind              -> injected PNG
  GET  /schemas/gesture            gesture JSON schema

Errors come back as {code, stage, message}.
"""

from __future__ import annotations

import hashlib
import tempfile
import threading
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import errors as err
from .highlight import STYLE_KINDS, InjectionStyle, inject
from .media import VideoClip, frame_to_png, load_video
from .pipeline import BackendSuite, PipelineConfig, Session, SessionStore


class GesturePoint(BaseModel):
    x: float
    y: float
    positive: bool = True


class GestureBox(BaseModel):
    x0: float
    y0: float
    x1: float
    y1: float


class GestureRegion(BaseModel):
    height: int
    width: int
    counts: list[int]


class GesturePayload(BaseModel):
    """Wire schema for a user selection gesture."""

    kind: Literal["points", "box", "lasso", "region"]
    anchor_frame: int = 0
    pixel_coords: bool = False
    points: Optional[list[GesturePoint]] = None
    box: Optional[GestureBox] = None
    region: Optional[GestureRegion] = None


class SessionRequest(BaseModel):
    clip_id: str


class ChatRequest(BaseModel):
    message: str = Field(min_length=1)


class CaptionRequest(BaseModel):
    config: Optional[dict] = None


_ERROR_CODES = {
    err.InvalidPromptError: (400, "invalid-prompt"),
    err.SessionStateError: (409, "session-state"),
    err.ShapeMismatchError: (400, "shape-mismatch"),
    err.MalformedRleError: (400, "malformed-rle"),
    err.DecodeError: (400, "decode-error"),
    err.EmptyVideoError: (400, "empty-video"),
    err.SegmentationFailedError: (502, "segmentation-failed"),
    err.TemporalBackendError: (502, "temporal-backend"),
    err.CaptionerBackendError: (502, "captioner-backend"),
    err.CaptionParseError: (502, "caption-parse"),
    err.ReplayMissError: (409, "replay-miss"),
    err.ScriptExhaustedError: (409, "script-exhausted"),
}


def _error_response(e: Exception) -> JSONResponse:
    stage = getattr(e, "stage", None) or "gateway"
    for cls, (status, code) in _ERROR_CODES.items():
        if isinstance(e, cls):
            return JSONResponse(
                status_code=status,
                content={"code": code, "stage": stage, "message": str(e)},
            )
    if isinstance(e, err.PipelineError):
        return JSONResponse(
            status_code=502,
            content={"code": "pipeline", "stage": e.stage, "message": str(e)},
        )
    if isinstance(e, ValueError):
        return JSONResponse(
            status_code=400,
            content={"code": "bad-request", "stage": stage, "message": str(e)},
        )
    return JSONResponse(
        status_code=500,
        content={"code": "internal", "stage": stage, "message": str(e)},
    )


class ClipStore:
    def __init__(self):
        self._clips: dict[str, VideoClip] = {}
        self._lock = threading.Lock()

    def add(self, data: bytes, suffix: str) -> str:
        clip_id = hashlib.sha256(data).hexdigest()[:12]
        with self._lock:
            if clip_id in self._clips:
                return clip_id
        with tempfile.NamedTemporaryFile(suffix=suffix or ".mp4", delete=False) as tmp:
            tmp.write(data)
            tmp_path = Path(tmp.name)
        try:
            clip = load_video(tmp_path)
        finally:
            tmp_path.unlink(missing_ok=True)
        with self._lock:
            self._clips[clip_id] = clip
        return clip_id

    def add_clip(self, clip: VideoClip) -> str:
        clip_id = hashlib.sha256(
            b"".join(f.pixels.tobytes() for f in clip.frames)
        ).hexdigest()[:12]
        with self._lock:
            self._clips[clip_id] = clip
        return clip_id

    def get(self, clip_id: str) -> Optional[VideoClip]:
        with self._lock:
            return self._clips.get(clip_id)


def create_app(
    suite: BackendSuite,
    config: Optional[PipelineConfig] = None,
    clip_store: Optional[ClipStore] = None,
) -> FastAPI:
    app = FastAPI(title="spotcap gateway")
    clips = clip_store or ClipStore()
    sessions = SessionStore()
    base_config = config or PipelineConfig()
    app.state.clips = clips
    app.state.sessions = sessions

    @app.exception_handler(Exception)
    async def _handle(request: Request, exc: Exception):
        return _error_response(exc)

    def _session_or_404(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise err.SessionStateError(f"unknown session {session_id}")
        return session

    @app.post("/videos")
    async def upload_video(file: UploadFile):
        data = await file.read()
        if not data:
            raise err.DecodeError("empty upload")
        suffix = Path(file.filename or "clip.mp4").suffix
        clip_id = clips.add(data, suffix)
        clip = clips.get(clip_id)
        return {
            "clip_id": clip_id,
            "frame_count": len(clip),
            "fps": clip.fps,
            "duration": clip.duration,
            "height": clip.height,
            "width": clip.width,
        }

    @app.post("/sessions")
    def create_session(request: SessionRequest):
        clip = clips.get(request.clip_id)
        if clip is None:
            return JSONResponse(
                status_code=404,
                content={
                    "code": "unknown-clip",
                    "stage": "gateway",
                    "message": f"clip {request.clip_id} not uploaded",
                },
            )
        session = sessions.create(suite, clip=clip, config=base_config)
        return {"session_id": session.session_id}

    @app.post("/sessions/{session_id}/prompt")
    def select_object(session_id: str, gesture: GesturePayload):
        session = _session_or_404(session_id)
        preview = session.select_object(gesture.model_dump(exclude_none=True))
        return preview.to_json()

    @app.post("/sessions/{session_id}/caption")
    def run_caption(session_id: str, request: CaptionRequest):
        session = _session_or_404(session_id)
        config = PipelineConfig.from_json(request.config) if request.config else None
        result = session.run_pipeline(config)
        return result.to_json()

    @app.post("/sessions/{session_id}/chat")
    def chat(session_id: str, request: ChatRequest):
        session = _session_or_404(session_id)
        reply = session.chat_turn(request.message)
        return {"reply": reply}

    @app.get("/sessions/{session_id}/frames/{t}")
    def injected_frame(session_id: str, t: int, style: Optional[str] = None):
        session = _session_or_404(session_id)
        if session.clip is None or session.masklet is None:
            raise err.SessionStateError("select an object before rendering frames")
        if not 0 <= t < len(session.clip):
            raise ValueError(f"frame {t} outside clip")
        if style is not None and style not in STYLE_KINDS:
            raise ValueError(f"unknown style {style!r}; expected one of {STYLE_KINDS}")
        chosen = (
            InjectionStyle(kind=style, params=base_config.injection_style.params)
            if style
            else base_config.injection_style
        )
        frame = inject(session.clip.frames[t], session.masklet.masks[t], chosen)
        return Response(content=frame_to_png(frame), media_type="image/png")

    @app.get("/schemas/gesture")
    def gesture_schema():
        return GesturePayload.model_json_schema()

    return app
