"""Visual prompt normalization and masklet extraction.

A user gesture (points, box, or free region) is normalized into pixel
space, then a pluggable segmentation backend is driven over every frame
of the clip to produce a masklet: one binary mask per frame for the
selected object. An optional Kalman gate rejects masks whose bounding
boxes teleport off the predicted track.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import cv2
import numpy as np

from .errors import (
    InvalidPromptError,
    SegmentationFailedError,
    ShapeMismatchError,
)
from .media import Box, Frame, Mask, RleMask, VideoClip, as_mask, bbox_of, rle_decode, rle_encode
from .tracking import KalmanParams, stabilize_track

PromptKind = Literal["points", "box", "region"]


@dataclass(frozen=True)
class PromptPoint:
    x: int
    y: int
    positive: bool = True


@dataclass(frozen=True)
class VisualPrompt:
    """Pixel-space object selection on one anchor frame."""

    kind: PromptKind
    anchor_frame: int
    points: tuple[PromptPoint, ...] = ()
    box: Optional[Box] = None
    region: Optional[Mask] = None

    def __post_init__(self):
        if self.kind == "points":
            if not self.points:
                raise InvalidPromptError("point prompt has no points")
            if not any(p.positive for p in self.points):
                raise InvalidPromptError("point prompt needs at least one positive point")
            if self.box is not None or self.region is not None:
                raise InvalidPromptError("point prompt must not carry a box or region")
        elif self.kind == "box":
            if self.box is None:
                raise InvalidPromptError("box prompt has no box")
            if self.points or self.region is not None:
                raise InvalidPromptError("box prompt must not carry points or a region")
        elif self.kind == "region":
            if self.region is None:
                raise InvalidPromptError("region prompt has no region")
            if self.points or self.box is not None:
                raise InvalidPromptError("region prompt must not carry points or a box")
        else:
            raise InvalidPromptError(f"unknown prompt kind {self.kind!r}")

    def to_json(self) -> dict:
        payload: dict = {"kind": self.kind, "anchor_frame": self.anchor_frame}
        if self.kind == "points":
            payload["points"] = [
                {"x": p.x, "y": p.y, "positive": p.positive} for p in self.points
            ]
        elif self.kind == "box":
            payload["box"] = self.box.to_json()
        else:
            payload["region"] = rle_encode(self.region).to_json()
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "VisualPrompt":
        kind = payload["kind"]
        anchor = int(payload["anchor_frame"])
        if kind == "points":
            pts = tuple(
                PromptPoint(int(p["x"]), int(p["y"]), bool(p.get("positive", True)))
                for p in payload["points"]
            )
            return cls(kind="points", anchor_frame=anchor, points=pts)
        if kind == "box":
            return cls(kind="box", anchor_frame=anchor, box=Box.from_json(payload["box"]))
        if kind == "region":
            return cls(
                kind="region",
                anchor_frame=anchor,
                region=rle_decode(RleMask.from_json(payload["region"])),
            )
        raise InvalidPromptError(f"unknown prompt kind {kind!r}")


@dataclass(frozen=True)
class Masklet:
    """Per-frame binary masks of one tracked object; empty mask = absent."""

    object_id: str
    masks: tuple[Mask, ...]
    anchor_frame: int
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.masks:
            raise ShapeMismatchError("masklet has no masks")
        shape = self.masks[0].shape
        for i, m in enumerate(self.masks):
            if m.shape != shape:
                raise ShapeMismatchError(f"mask {i} shape {m.shape} != {shape}")


@dataclass(frozen=True)
class SegmentResult:
    mask: Mask
    confidence: float = 1.0
    context: Optional[str] = None


class SegmenterBackend(ABC):
    """Produces one binary mask per (frame, prompt-or-context) call.

    ``stateless`` backends are re-prompted on every frame and may be called
    concurrently; stateful ones are called strictly in frame order with a
    propagation context token threaded between calls.
    """

    capabilities: frozenset[str] = frozenset({"points", "box", "region"})
    stateless: bool = False
    identity: str = "segmenter"

    @abstractmethod
    def segment(
        self, frame: Frame, prompt: Optional[VisualPrompt], context: Optional[str]
    ) -> SegmentResult:
        ...


# ---------------------------------------------------------------------------
# gesture normalization
# ---------------------------------------------------------------------------

def _scale_xy(x: float, y: float, dims: tuple[int, int], pixel_coords: bool) -> tuple[int, int]:
    h, w = dims
    if not pixel_coords:
        x, y = x * w, y * h
    px = int(np.floor(x + 0.5))
    py = int(np.floor(y + 0.5))
    return min(max(px, 0), w - 1), min(max(py, 0), h - 1)


def normalize_prompt(raw_gesture: dict, frame_dims: tuple[int, int]) -> VisualPrompt:
    """Turn a UI gesture record into a pixel-space VisualPrompt.

    Gestures carry normalized [0,1] coordinates unless ``pixel_coords`` is
    set. Lasso paths (kind "lasso") are rasterized into a region mask.
    """
    h, w = frame_dims
    if h < 1 or w < 1:
        raise ValueError(f"bad frame dims {frame_dims}")
    kind = raw_gesture.get("kind")
    anchor = int(raw_gesture.get("anchor_frame", 0))
    pixel_coords = bool(raw_gesture.get("pixel_coords", False))

    if kind == "points":
        raw_points = raw_gesture.get("points") or []
        if not raw_points:
            raise InvalidPromptError("gesture has no points")
        pts = []
        for p in raw_points:
            x, y = _scale_xy(float(p["x"]), float(p["y"]), frame_dims, pixel_coords)
            pts.append(PromptPoint(x=x, y=y, positive=bool(p.get("positive", True))))
        return VisualPrompt(kind="points", anchor_frame=anchor, points=tuple(pts))

    if kind == "box":
        raw_box = raw_gesture.get("box")
        if not raw_box:
            raise InvalidPromptError("gesture has no box")
        x0, y0 = _scale_xy(float(raw_box["x0"]), float(raw_box["y0"]), frame_dims, pixel_coords)
        x1, y1 = _scale_xy(float(raw_box["x1"]), float(raw_box["y1"]), frame_dims, pixel_coords)
        box = Box(
            x_min=min(x0, x1), y_min=min(y0, y1), x_max=max(x0, x1), y_max=max(y0, y1)
        )
        return VisualPrompt(kind="box", anchor_frame=anchor, box=box)

    if kind == "lasso":
        raw_points = raw_gesture.get("points") or []
        if len(raw_points) < 3:
            raise InvalidPromptError("lasso needs at least 3 path points")
        path = [
            _scale_xy(float(p["x"]), float(p["y"]), frame_dims, pixel_coords)
            for p in raw_points
        ]
        canvas = np.zeros((h, w), dtype=np.uint8)
        cv2.fillPoly(canvas, [np.asarray(path, dtype=np.int32)], 1)
        region = canvas.astype(bool)
        if not region.any():
            raise InvalidPromptError("lasso rasterized to an empty region")
        return VisualPrompt(kind="region", anchor_frame=anchor, region=region)

    if kind == "region":
        raw_region = raw_gesture.get("region")
        if not raw_region:
            raise InvalidPromptError("gesture has no region payload")
        region = rle_decode(RleMask.from_json(raw_region))
        if region.shape != (h, w):
            raise ShapeMismatchError(
                f"region shape {region.shape} does not match frame dims {(h, w)}"
            )
        if not region.any():
            raise InvalidPromptError("region mask is empty")
        return VisualPrompt(kind="region", anchor_frame=anchor, region=region)

    raise InvalidPromptError(f"unknown gesture kind {kind!r}")


# ---------------------------------------------------------------------------
# masklet extraction
# ---------------------------------------------------------------------------

def _object_id(clip: VideoClip, prompt: VisualPrompt) -> str:
    digest = hashlib.sha256()
    anchor = clip.frames[prompt.anchor_frame]
    digest.update(anchor.pixels.tobytes())
    digest.update(repr(sorted(prompt.to_json().items())).encode())
    return f"obj-{digest.hexdigest()[:12]}"


def _checked_mask(result: SegmentResult, frame: Frame) -> Mask:
    mask = as_mask(result.mask)
    if mask.shape != (frame.height, frame.width):
        raise ShapeMismatchError(
            f"backend mask shape {mask.shape} != frame {(frame.height, frame.width)}"
        )
    return mask


def segment_video(
    clip: VideoClip,
    prompt: VisualPrompt,
    backend: SegmenterBackend,
    stabilize: bool = False,
    kalman_params: KalmanParams | None = None,
    gate_iou: float = 0.3,
) -> Masklet:
    """Produce a mask for every frame of the clip.

    Backend failure on the anchor frame aborts; failure elsewhere degrades
    to an empty mask plus a recorded warning. With ``stabilize`` set,
    per-frame boxes are gated against Kalman predictions and gated frames
    are blanked out.
    """
    if prompt.kind not in backend.capabilities:
        raise SegmentationFailedError(
            f"backend does not accept {prompt.kind!r} prompts"
        )
    if not 0 <= prompt.anchor_frame < len(clip):
        raise ValueError(f"anchor frame {prompt.anchor_frame} outside clip")

    n = len(clip)
    anchor = prompt.anchor_frame
    masks: list[Optional[Mask]] = [None] * n
    warnings: list[str] = []

    try:
        result = backend.segment(clip.frames[anchor], prompt, None)
    except Exception as e:
        raise SegmentationFailedError(f"anchor frame {anchor}: {e}") from e
    masks[anchor] = _checked_mask(result, clip.frames[anchor])
    context = result.context

    rest = [t for t in range(n) if t != anchor]

    def _one(t: int, ctx: Optional[str]) -> Optional[str]:
        frame = clip.frames[t]
        try:
            if backend.stateless:
                r = backend.segment(frame, prompt, None)
            else:
                r = backend.segment(frame, None, ctx)
        except Exception as e:
            masks[t] = np.zeros((frame.height, frame.width), dtype=bool)
            warnings.append(f"frame {t}: backend failed ({e}); mask left empty")
            return ctx
        masks[t] = _checked_mask(r, frame)
        return r.context if r.context is not None else ctx

    if backend.stateless and n > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(rest) or 1)) as pool:
            list(pool.map(lambda t: _one(t, None), rest))
        warnings.sort()  # concurrent completion order is not meaningful
    else:
        for t in rest:
            context = _one(t, context)

    final_masks = [m if m is not None else np.zeros((clip.height, clip.width), bool) for m in masks]

    if stabilize:
        boxes: list[Optional[Box]] = []
        for m in final_masks:
            b = bbox_of(m)
            if b is not None and (b.x_max == b.x_min or b.y_max == b.y_min):
                b = None  # zero-extent box cannot be measured
            boxes.append(b)
        if any(b is not None for b in boxes):
            track = stabilize_track(boxes, params=kalman_params, gate_iou=gate_iou)
            for t, flagged in enumerate(track.outliers):
                if flagged:
                    final_masks[t] = np.zeros_like(final_masks[t])
                    warnings.append(f"frame {t}: box off predicted track; mask rejected")
        else:
            warnings.append("stabilization skipped: no measurable boxes in track")

    return Masklet(
        object_id=_object_id(clip, prompt),
        masks=tuple(final_masks),
        anchor_frame=anchor,
        warnings=tuple(warnings),
    )
