"""Deterministic synthetic clips with exact ground-truth masklets.

Scenes rasterize with pure integer arithmetic, so the same scene always
produces identical bytes on any platform. Objects drawn later occlude
earlier ones, and the ground-truth masks cover only the visible pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .media import Mask, VideoClip, clip_from_arrays
from .segmenter import Masklet

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class SceneObject:
    shape: Literal["rectangle", "disk"]
    x: float  # rectangle: left edge; disk: center x
    y: float  # rectangle: top edge; disk: center y
    width: int = 0
    height: int = 0
    radius: int = 0
    vx: float = 0.0
    vy: float = 0.0
    color: RGB = (255, 0, 0)

    def __post_init__(self):
        if self.shape == "rectangle" and (self.width < 1 or self.height < 1):
            raise ValueError("rectangle needs width and height >= 1")
        if self.shape == "disk" and self.radius < 1:
            raise ValueError("disk needs radius >= 1")

    def to_json(self) -> dict:
        return {
            "shape": self.shape,
            "x": self.x,
            "y": self.y,
            "width": self.width,
            "height": self.height,
            "radius": self.radius,
            "vx": self.vx,
            "vy": self.vy,
            "color": list(self.color),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "SceneObject":
        return cls(
            shape=payload["shape"],
            x=float(payload["x"]),
            y=float(payload["y"]),
            width=int(payload.get("width", 0)),
            height=int(payload.get("height", 0)),
            radius=int(payload.get("radius", 0)),
            vx=float(payload.get("vx", 0.0)),
            vy=float(payload.get("vy", 0.0)),
            color=tuple(payload.get("color", (255, 0, 0))),
        )


@dataclass(frozen=True)
class ScriptedScene:
    width: int
    height: int
    frame_count: int
    fps: float = 5.0
    background: RGB = (16, 16, 16)
    objects: tuple[SceneObject, ...] = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frame_count < 1:
            raise ValueError("scene needs positive dimensions and frame count")
        object.__setattr__(self, "objects", tuple(self.objects))

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "frame_count": self.frame_count,
            "fps": self.fps,
            "background": list(self.background),
            "objects": [o.to_json() for o in self.objects],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ScriptedScene":
        return cls(
            width=int(payload["width"]),
            height=int(payload["height"]),
            frame_count=int(payload["frame_count"]),
            fps=float(payload.get("fps", 5.0)),
            background=tuple(payload.get("background", (16, 16, 16))),
            objects=tuple(SceneObject.from_json(o) for o in payload.get("objects", ())),
        )


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def _raster(obj: SceneObject, t: int, height: int, width: int) -> Mask:
    x = _round_half_up(obj.x + obj.vx * t)
    y = _round_half_up(obj.y + obj.vy * t)
    mask = np.zeros((height, width), dtype=bool)
    if obj.shape == "rectangle":
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + obj.width, width), min(y + obj.height, height)
        if x0 < x1 and y0 < y1:
            mask[y0:y1, x0:x1] = True
    else:
        yy, xx = np.ogrid[0:height, 0:width]
        mask = (xx - x) ** 2 + (yy - y) ** 2 <= obj.radius**2
    return mask


def synth_clip(scene: ScriptedScene) -> tuple[VideoClip, list[Masklet]]:
    """Rasterize a scene into a clip plus one ground-truth masklet per object."""
    h, w = scene.height, scene.width
    per_object: list[list[Mask]] = [[] for _ in scene.objects]
    arrays = []
    for t in range(scene.frame_count):
        rasters = [_raster(obj, t, h, w) for obj in scene.objects]
        frame = np.empty((h, w, 3), dtype=np.uint8)
        frame[:] = np.asarray(scene.background, dtype=np.uint8)
        for i, obj in enumerate(scene.objects):
            visible = rasters[i].copy()
            for later in rasters[i + 1 :]:
                visible &= ~later
            frame[visible] = np.asarray(obj.color, dtype=np.uint8)
            per_object[i].append(visible)
        arrays.append(frame)
    clip = clip_from_arrays(arrays, scene.fps)
    masklets = [
        Masklet(object_id=f"scene-obj-{i}", masks=tuple(masks), anchor_frame=0)
        for i, masks in enumerate(per_object)
    ]
    return clip, masklets
