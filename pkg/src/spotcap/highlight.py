"""Visual highlight injection: burn an object's masklet into the frames.

Eight styles: bounding_box, blur, circle, color_block, halo, mask,
polygon, and the combined bbox_plus_mask default. All blending happens in
real arithmetic and is rounded half-up to 8 bits at the very end; the box
blur runs on integer summed-area tables, so renders are bit-exact across
platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import cv2
import numpy as np

from .errors import DegenerateInteriorError, ShapeMismatchError
from .media import (
    Box,
    Frame,
    Mask,
    VideoClip,
    as_mask,
    bbox_of,
    contour_polygon,
    morphology,
)
from .segmenter import Masklet

STYLE_KINDS = (
    "bounding_box",
    "blur",
    "circle",
    "color_block",
    "halo",
    "mask",
    "polygon",
    "bbox_plus_mask",
)

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class StyleParams:
    stroke_color: RGB = (255, 0, 0)
    stroke_width: int = 3
    overlay_color: RGB = (0, 0, 255)
    overlay_alpha: float = 0.4
    blur_radius: int = 7
    halo_radius: int = 6
    simplify_tolerance: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.overlay_alpha <= 1.0:
            raise ValueError("overlay_alpha must be in [0, 1]")
        if self.stroke_width < 1 or self.blur_radius < 1 or self.halo_radius < 1:
            raise ValueError("stroke width and radii must be >= 1")
        if self.simplify_tolerance < 0:
            raise ValueError("simplify_tolerance must be >= 0")

    def to_json(self) -> dict:
        return {
            "stroke_color": list(self.stroke_color),
            "stroke_width": self.stroke_width,
            "overlay_color": list(self.overlay_color),
            "overlay_alpha": self.overlay_alpha,
            "blur_radius": self.blur_radius,
            "halo_radius": self.halo_radius,
            "simplify_tolerance": self.simplify_tolerance,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "StyleParams":
        return cls(
            stroke_color=tuple(payload.get("stroke_color", (255, 0, 0))),
            stroke_width=int(payload.get("stroke_width", 3)),
            overlay_color=tuple(payload.get("overlay_color", (0, 0, 255))),
            overlay_alpha=float(payload.get("overlay_alpha", 0.4)),
            blur_radius=int(payload.get("blur_radius", 7)),
            halo_radius=int(payload.get("halo_radius", 6)),
            simplify_tolerance=float(payload.get("simplify_tolerance", 2.0)),
        )


@dataclass(frozen=True)
class InjectionStyle:
    kind: str = "bbox_plus_mask"
    params: StyleParams = field(default_factory=StyleParams)

    def __post_init__(self):
        if self.kind not in STYLE_KINDS:
            raise ValueError(f"unknown style kind {self.kind!r}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params.to_json()}

    @classmethod
    def from_json(cls, payload: dict) -> "InjectionStyle":
        return cls(
            kind=payload.get("kind", "bbox_plus_mask"),
            params=StyleParams.from_json(payload.get("params", {})),
        )


def default_style() -> InjectionStyle:
    """Combined colored bounding box + blue mask overlay."""
    return InjectionStyle(kind="bbox_plus_mask", params=StyleParams())


# ---------------------------------------------------------------------------
# rendering primitives
# ---------------------------------------------------------------------------

def _blend_region(pixels: np.ndarray, region: Mask, color: RGB, alpha: float) -> None:
    if alpha <= 0 or not region.any():
        return
    orig = pixels[region].astype(np.float64)
    target = np.asarray(color, dtype=np.float64)
    blended = (1.0 - alpha) * orig + alpha * target
    pixels[region] = np.floor(blended + 0.5).astype(np.uint8)


def _paint_region(pixels: np.ndarray, region: Mask, color: RGB) -> None:
    pixels[region] = np.asarray(color, dtype=np.uint8)


def _bbox_ring(shape: tuple[int, int], box: Box, width: int) -> Mask:
    ring = np.zeros(shape, dtype=bool)
    x0, y0, x1, y1 = int(box.x_min), int(box.y_min), int(box.x_max), int(box.y_max)
    ring[y0 : y1 + 1, x0 : x1 + 1] = True
    iy0, iy1 = y0 + width, y1 - width
    ix0, ix1 = x0 + width, x1 - width
    if iy0 <= iy1 and ix0 <= ix1:
        ring[iy0 : iy1 + 1, ix0 : ix1 + 1] = False
    return ring


def _stroke_contours(
    pixels: np.ndarray, mask: Mask, params: StyleParams, pad_for_tolerance: bool = False
) -> None:
    # the polygon style traces a mask dilated by the simplification
    # tolerance: chords then cut at most back to the true boundary instead
    # of into the object, keeping the eroded interior untouched
    source = mask
    if pad_for_tolerance and params.simplify_tolerance > 0:
        source = morphology(mask, "dilate", int(np.ceil(params.simplify_tolerance)))
    for poly in contour_polygon(source, params.simplify_tolerance):
        pts = np.asarray(poly.vertices, dtype=np.int32).reshape(-1, 1, 2)
        cv2.polylines(
            pixels,
            [pts],
            isClosed=True,
            color=params.stroke_color,
            thickness=params.stroke_width,
            lineType=cv2.LINE_8,
        )


def _stroke_circle(pixels: np.ndarray, mask: Mask, params: StyleParams) -> None:
    ys, xs = np.nonzero(mask)
    pts = np.stack([xs, ys], axis=1).astype(np.float32)
    (cx, cy), radius = cv2.minEnclosingCircle(pts)
    cv2.circle(
        pixels,
        (int(np.floor(cx + 0.5)), int(np.floor(cy + 0.5))),
        int(np.ceil(radius)) + 1,
        color=params.stroke_color,
        thickness=params.stroke_width,
        lineType=cv2.LINE_8,
    )


def _box_blur(pixels: np.ndarray, radius: int) -> np.ndarray:
    """Exact integer box blur; windows clamp at the borders."""
    h, w, _ = pixels.shape
    table = np.zeros((h + 1, w + 1, 3), dtype=np.int64)
    table[1:, 1:] = pixels.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - radius, 0, h)[:, None]
    y1 = np.clip(ys + radius + 1, 0, h)[:, None]
    x0 = np.clip(xs - radius, 0, w)[None, :]
    x1 = np.clip(xs + radius + 1, 0, w)[None, :]
    sums = table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]
    area = ((y1 - y0) * (x1 - x0)).astype(np.int64)[..., None]
    return ((2 * sums + area) // (2 * area)).astype(np.uint8)  # round half up


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def inject(frame: Frame, mask: Mask, style: InjectionStyle) -> Frame:
    """Render one highlight style onto a copy of the frame.

    An empty mask means the object is absent for this frame; the frame is
    returned pixel-identical.
    """
    m = as_mask(mask)
    if m.shape != (frame.height, frame.width):
        raise ShapeMismatchError(
            f"mask shape {m.shape} != frame {(frame.height, frame.width)}"
        )
    if not m.any():
        return Frame(index=frame.index, pixels=frame.pixels, timestamp=frame.timestamp)

    p = style.params
    out = frame.pixels.copy()
    kind = style.kind

    if kind in ("bounding_box", "bbox_plus_mask"):
        ring = _bbox_ring(m.shape, bbox_of(m), p.stroke_width)
        _paint_region(out, ring, p.stroke_color)
    if kind in ("color_block", "bbox_plus_mask"):
        _blend_region(out, m, p.overlay_color, p.overlay_alpha)
    if kind == "blur":
        blurred = _box_blur(frame.pixels, p.blur_radius)
        outside = ~m
        out[outside] = blurred[outside]
    if kind == "circle":
        _stroke_circle(out, m, p)
    if kind == "halo":
        ring = morphology(m, "dilate", p.halo_radius) & ~m
        _blend_region(out, ring, p.overlay_color, p.overlay_alpha)
    if kind == "mask":
        _blend_region(out, m, p.overlay_color, p.overlay_alpha)
        _stroke_contours(out, m, p)
    if kind == "polygon":
        _stroke_contours(out, m, p, pad_for_tolerance=True)

    return Frame(index=frame.index, pixels=out, timestamp=frame.timestamp)


def inject_video(clip: VideoClip, masklet: Masklet, style: InjectionStyle) -> VideoClip:
    """Apply :func:`inject` frame by frame; fps and timestamps survive."""
    if len(masklet.masks) != len(clip):
        raise ShapeMismatchError(
            f"masklet has {len(masklet.masks)} masks for {len(clip)} frames"
        )
    if masklet.masks[0].shape != (clip.height, clip.width):
        raise ShapeMismatchError(
            f"masklet shape {masklet.masks[0].shape} != clip {(clip.height, clip.width)}"
        )
    frames = tuple(
        inject(frame, masklet.masks[frame.index], style) for frame in clip.frames
    )
    return VideoClip(frames=frames, fps=clip.fps)


def interior_color_shift(
    original: Frame, rendered: Frame, mask: Mask, margin: int
) -> float:
    """Mean absolute per-channel change inside the eroded object region.

    Quantifies how much a highlight style altered the object itself:
    outline-only styles score 0, overlay styles score with the blend.
    """
    if original.pixels.shape != rendered.pixels.shape:
        raise ShapeMismatchError("frames differ in size")
    m = as_mask(mask)
    if m.shape != (original.height, original.width):
        raise ShapeMismatchError("mask does not match frames")
    interior = morphology(m, "erode", margin)
    if not interior.any():
        raise DegenerateInteriorError(
            f"margin {margin} erodes the mask to nothing"
        )
    diff = np.abs(
        original.pixels.astype(np.int64) - rendered.pixels.astype(np.int64)
    )
    return float(diff[interior].mean())


def allowed_change_region(mask: Mask, style: InjectionStyle) -> Mask:
    """Pixels a style is permitted to touch; used by conformance tests."""
    m = as_mask(mask)
    if not m.any():
        return np.zeros_like(m)
    p = style.params
    kind = style.kind
    if kind == "blur":
        return ~m
    tol = int(np.ceil(p.simplify_tolerance))
    region = np.zeros_like(m)
    if kind in ("color_block",):
        region |= m
    if kind in ("mask",):
        # overlay + a contour stroke whose chords wander tol either way
        region |= morphology(m, "dilate", p.stroke_width + tol + 1)
    if kind in ("polygon",):
        # traced on a tol-dilated mask, chords wander tol around that
        region |= morphology(m, "dilate", p.stroke_width + 2 * tol + 1)
    if kind in ("bounding_box", "bbox_plus_mask"):
        region |= _bbox_ring(m.shape, bbox_of(m), p.stroke_width)
        if kind == "bbox_plus_mask":
            region |= m
    if kind == "circle":
        ys, xs = np.nonzero(m)
        pts = np.stack([xs, ys], axis=1).astype(np.float32)
        (cx, cy), radius = cv2.minEnclosingCircle(pts)
        yy, xx = np.mgrid[0 : m.shape[0], 0 : m.shape[1]]
        dist = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        region |= np.abs(dist - (radius + 1)) <= p.stroke_width + 1.5
    if kind == "halo":
        region |= morphology(m, "dilate", p.halo_radius) & ~m
    return region
