"""Constant-velocity Kalman filtering for bounding-box tracks.

State vector: [cx, cy, w, h, vcx, vcy, vw, vh] — box center, box size, and
their per-frame velocities. Observations are the first four components.
Boxes are treated as continuous geometry here: w = x_max - x_min and the
center is the midpoint, so a box (0, 0, 10, 10) measures as (5, 5, 10, 10).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyTrackError, InvalidMeasurementError
from .media import Box

_DIM = 8
_OBS = 4

# x' = x + v for the first four components
_F = np.eye(_DIM)
_F[:_OBS, _OBS:] = np.eye(_OBS)
_H = np.zeros((_OBS, _DIM))
_H[:, :_OBS] = np.eye(_OBS)


@dataclass(frozen=True)
class KalmanParams:
    """Noise settings; variances, per frame."""

    process_noise_pos: float = 1e-2
    process_noise_size: float = 1e-4
    measurement_noise: float = 1e-1
    init_state_var: float = 10.0
    init_velocity_var: float = 1000.0

    def process_matrix(self) -> np.ndarray:
        p, s = self.process_noise_pos, self.process_noise_size
        return np.diag([p, p, s, s, p, p, s, s])

    def measurement_matrix(self) -> np.ndarray:
        return np.eye(_OBS) * self.measurement_noise


@dataclass(frozen=True)
class KfState:
    mean: np.ndarray        # shape (8,)
    covariance: np.ndarray  # shape (8, 8)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(_DIM)
        cov = np.asarray(self.covariance, dtype=float).reshape(_DIM, _DIM)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


def box_to_measurement(box: Box) -> np.ndarray:
    """(cx, cy, w, h) from a box; rejects zero-extent boxes."""
    w = float(box.x_max) - float(box.x_min)
    h = float(box.y_max) - float(box.y_min)
    if w <= 0 or h <= 0:
        raise InvalidMeasurementError(f"measured size {w}x{h} is not positive")
    return np.array([(box.x_min + box.x_max) / 2.0, (box.y_min + box.y_max) / 2.0, w, h])


def state_to_box(state: KfState) -> Box:
    cx, cy, w, h = state.mean[:_OBS]
    return Box(x_min=cx - w / 2, y_min=cy - h / 2, x_max=cx + w / 2, y_max=cy + h / 2)


def init_state(box: Box, params: KalmanParams) -> KfState:
    mean = np.zeros(_DIM)
    mean[:_OBS] = box_to_measurement(box)
    cov = np.diag([params.init_state_var] * _OBS + [params.init_velocity_var] * _OBS)
    return KfState(mean=mean, covariance=cov)


def _predict(state: KfState, params: KalmanParams) -> KfState:
    mean = _F @ state.mean
    mean[2] = max(mean[2], 1e-9)  # extrapolated sizes stay physical
    mean[3] = max(mean[3], 1e-9)
    cov = _F @ state.covariance @ _F.T + params.process_matrix()
    cov = (cov + cov.T) / 2.0
    return KfState(mean=mean, covariance=cov)


def _update(state: KfState, z: np.ndarray, params: KalmanParams) -> KfState:
    r = params.measurement_matrix()
    innovation = z - _H @ state.mean
    s = _H @ state.covariance @ _H.T + r
    # pinv: with zero noise the filter can become fully certain (S singular),
    # in which case the measurement adds nothing and the gain is zero
    gain = state.covariance @ _H.T @ np.linalg.pinv(s)
    mean = state.mean + gain @ innovation
    # keep sizes physical even for hostile measurement sequences
    mean[2] = max(mean[2], 1e-9)
    mean[3] = max(mean[3], 1e-9)
    joseph = np.eye(_DIM) - gain @ _H
    cov = joseph @ state.covariance @ joseph.T + gain @ r @ gain.T
    cov = (cov + cov.T) / 2.0
    return KfState(mean=mean, covariance=cov)


def kalman_step(
    state: KfState,
    measurement: Optional[Box],
    params: KalmanParams | None = None,
) -> KfState:
    """One filter step: constant-velocity predict, then update if measured."""
    params = params or KalmanParams()
    predicted = _predict(state, params)
    if measurement is None:
        return predicted
    return _update(predicted, box_to_measurement(measurement), params)


def box_iou(a: Box, b: Box) -> float:
    """IoU of two boxes as continuous rectangles (w = x_max - x_min)."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min)
    area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class StabilizedTrack:
    boxes: tuple[Box, ...]
    outliers: tuple[bool, ...]


def stabilize_track(
    boxes: Sequence[Optional[Box]],
    params: KalmanParams | None = None,
    gate_iou: float = 0.3,
) -> StabilizedTrack:
    """Smooth a box track and gate out measurements that jump off it.

    A measurement whose IoU with the filter prediction falls below
    ``gate_iou`` is flagged as an outlier and treated as missing for that
    step. Frames before the first measurement are backfilled with it.
    """
    params = params or KalmanParams()
    first = next((i for i, b in enumerate(boxes) if b is not None), None)
    if first is None:
        raise EmptyTrackError("no measurements in track")

    out_boxes: list[Box] = []
    flags: list[bool] = []
    state = init_state(boxes[first], params)
    init_box = state_to_box(state)
    for _ in range(first):
        out_boxes.append(init_box)
        flags.append(False)
    out_boxes.append(init_box)
    flags.append(False)

    for t in range(first + 1, len(boxes)):
        predicted = _predict(state, params)
        measurement = boxes[t]
        outlier = False
        if measurement is not None:
            if box_iou(state_to_box(predicted), measurement) < gate_iou:
                outlier = True
                measurement = None
        if measurement is None:
            state = predicted
        else:
            state = _update(predicted, box_to_measurement(measurement), params)
        out_boxes.append(state_to_box(state))
        flags.append(outlier)

    return StabilizedTrack(boxes=tuple(out_boxes), outliers=tuple(flags))
