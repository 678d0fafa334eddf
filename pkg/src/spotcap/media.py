"""Frames, clips, binary masks, and the geometry primitives built on them.

Conventions used by every other module:
  * x = column, y = row, origin at the top-left corner.
  * Boxes are inclusive pixel coordinates.
  * Masks are 2-D boolean numpy arrays; run-length encoding is row-major
    with alternating counts that always begin with a zero-run (the first
    count may be 0), matching the common annotation-tool convention.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence

import cv2
import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    DecodeError,
    EmptyMaskError,
    EmptyVideoError,
    MalformedRleError,
    ShapeMismatchError,
)

Mask = np.ndarray  # 2-D bool array, shape (H, W)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    """One RGB video frame with its position in the parent clip."""

    index: int
    pixels: np.ndarray  # (H, W, 3) uint8, read-only
    timestamp: float

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"frame pixels must be HxWx3, got {arr.shape}")
        if arr is self.pixels:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)
        if self.index < 0:
            raise ValueError("frame index must be non-negative")
        if self.timestamp < 0:
            raise ValueError("frame timestamp must be non-negative")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class VideoClip:
    """An ordered, gap-free sequence of equally sized frames."""

    frames: tuple[Frame, ...]
    fps: float

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise EmptyVideoError("clip has no frames")
        h, w = self.frames[0].height, self.frames[0].width
        for i, f in enumerate(self.frames):
            if f.index != i:
                raise ValueError(f"frame {i} carries index {f.index}")
            if (f.height, f.width) != (h, w):
                raise ShapeMismatchError("frames differ in size")

    @property
    def duration(self) -> float:
        return len(self.frames) / self.fps

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded binary mask, zero-run first, row-major."""

    height: int
    width: int
    counts: tuple[int, ...]

    def to_json(self) -> dict:
        return {"height": self.height, "width": self.width, "counts": list(self.counts)}

    @classmethod
    def from_json(cls, payload: dict) -> "RleMask":
        try:
            return cls(
                height=int(payload["height"]),
                width=int(payload["width"]),
                counts=tuple(int(c) for c in payload["counts"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedRleError(f"bad rle payload: {e}") from e


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, inclusive pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self}")

    def to_json(self) -> dict:
        return {
            "x_min": self.x_min,
            "y_min": self.y_min,
            "x_max": self.x_max,
            "y_max": self.y_max,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Box":
        return cls(payload["x_min"], payload["y_min"], payload["x_max"], payload["y_max"])


@dataclass(frozen=True)
class Polygon:
    """Closed polygon as an ordered vertex sequence of (x, y) pixels."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))


# ---------------------------------------------------------------------------
# mask helpers
# ---------------------------------------------------------------------------

def as_mask(arr: np.ndarray) -> Mask:
    """Coerce an array-like of 0/1 values into a canonical bool mask."""
    m = np.asarray(arr)
    if m.ndim != 2:
        raise ShapeMismatchError(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool)


def empty_mask(height: int, width: int) -> Mask:
    return np.zeros((height, width), dtype=bool)


def clip_from_arrays(arrays: Sequence[np.ndarray], fps: float) -> VideoClip:
    """Build a clip from raw HxWx3 uint8 arrays; timestamps are index / fps."""
    frames = tuple(Frame(index=i, pixels=a, timestamp=i / fps) for i, a in enumerate(arrays))
    return VideoClip(frames=frames, fps=fps)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def load_video(source_path: str | Path, target_fps: Optional[float] = None) -> VideoClip:
    """Decode a video file, optionally resampling to a lower frame rate.

    Resampling picks source frames by nearest-index stride sampling, no
    interpolation. Timestamps are re-derived from the output frame rate.
    """
    path = Path(source_path)
    if not path.exists():
        raise DecodeError(f"no such file: {path}")
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeError(f"could not open video: {path}")
    native_fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
    raw: list[np.ndarray] = []
    while True:
        ok, bgr = cap.read()
        if not ok:
            break
        raw.append(cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB))
    cap.release()
    if not raw:
        raise DecodeError(f"no decodable frames in {path}")
    if native_fps <= 0:
        native_fps = 30.0  # containers without fps metadata
    fps = native_fps
    if target_fps is not None:
        if target_fps <= 0:
            raise ValueError("target_fps must be positive")
        if target_fps > native_fps:
            raise ValueError(f"target_fps {target_fps} exceeds native fps {native_fps}")
        stride = native_fps / target_fps
        picked = []
        k = 0
        while True:
            src = int(np.floor(k * stride + 0.5))
            if src >= len(raw):
                break
            picked.append(raw[src])
            k += 1
        raw = picked
        fps = target_fps
    if not raw:
        raise EmptyVideoError(f"resampling left no frames for {path}")
    return clip_from_arrays(raw, fps)


def rle_encode(mask: Mask) -> RleMask:
    """Encode a mask row-major; counts alternate starting with a zero-run."""
    m = as_mask(mask)
    h, w = m.shape
    flat = m.ravel()
    if flat.size == 0:
        return RleMask(height=h, width=w, counts=(0,))
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return RleMask(height=h, width=w, counts=tuple(int(c) for c in counts))


def rle_decode(rle: RleMask) -> Mask:
    """Invert :func:`rle_encode`; raises when counts do not fit the size."""
    counts = np.asarray(rle.counts, dtype=np.int64)
    if counts.size == 0 or (counts < 0).any():
        raise MalformedRleError("counts must be non-negative and non-empty")
    if (counts[1:] == 0).any():
        raise MalformedRleError("interior zero-length runs are not allowed")
    total = int(counts.sum())
    if total != rle.height * rle.width:
        raise MalformedRleError(
            f"counts sum to {total}, expected {rle.height * rle.width}"
        )
    values = np.arange(counts.size) % 2 == 1
    flat = np.repeat(values, counts)
    return flat.reshape(rle.height, rle.width)


def bbox_of(mask: Mask) -> Optional[Box]:
    """Tightest box around the set pixels, or None for an empty mask."""
    m = as_mask(mask)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(m.any(axis=0))
    return Box(
        x_min=int(cols[0]),
        y_min=int(rows[0]),
        x_max=int(cols[-1]),
        y_max=int(rows[-1]),
    )


def iou(a: Mask, b: Mask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    ma, mb = as_mask(a), as_mask(b)
    if ma.shape != mb.shape:
        raise ShapeMismatchError(f"mask shapes differ: {ma.shape} vs {mb.shape}")
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(ma & mb))
    return inter / union


def morphology(mask: Mask, op: Literal["dilate", "erode"], radius: int) -> Mask:
    """Dilate or erode with a square structuring element of side 2*radius+1."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    m = as_mask(mask)
    if radius == 0:
        return m.copy()
    size = 2 * radius + 1
    if op == "dilate":
        return ndimage.maximum_filter(m, size=size, mode="constant", cval=False)
    if op == "erode":
        return ndimage.minimum_filter(m, size=size, mode="constant", cval=False)
    raise ValueError(f"unknown morphology op {op!r}")


def contour_polygon(mask: Mask, simplify_tolerance: float = 1.0) -> list[Polygon]:
    """Trace the outer boundary of each connected component.

    Vertices are boundary pixel coordinates; the chain is simplified by
    perpendicular-distance tolerance. Components too thin to enclose area
    still yield a (degenerate) polygon so every component is represented.
    """
    m = as_mask(mask)
    if not m.any():
        raise EmptyMaskError("cannot trace contours of an empty mask")
    contours, _ = cv2.findContours(
        m.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE
    )
    polygons = []
    for contour in contours:
        approx = cv2.approxPolyDP(contour, float(simplify_tolerance), closed=True)
        pts = [(int(p[0]), int(p[1])) for p in approx.reshape(-1, 2)]
        while len(pts) < 3:  # single pixels / 1-px lines
            pts.append(pts[-1])
        polygons.append(Polygon(vertices=tuple(pts)))
    return polygons


# ---------------------------------------------------------------------------
# image interchange
# ---------------------------------------------------------------------------

def frame_to_png(frame: Frame) -> bytes:
    """Encode a frame's RGB pixels as PNG bytes."""
    buf = io.BytesIO()
    Image.fromarray(frame.pixels).save(buf, format="PNG")
    return buf.getvalue()


def pixels_from_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes back to an HxWx3 uint8 RGB array."""
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_frame_png(frame: Frame, path: str | Path) -> None:
    Path(path).write_bytes(frame_to_png(frame))
