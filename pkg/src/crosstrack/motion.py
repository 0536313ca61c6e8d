"""Constant-velocity Kalman filters for image-plane and 3D box tracks.

Image tracks use a 7-dim state [u, v, s, r, du, dv, ds]: box center, box
area, aspect ratio, and velocities for everything but the aspect ratio.
3D tracks use a 10-dim state [x, y, z, yaw, l, w, h, dx, dy, dz]: centroid,
heading, extents, and centroid velocities.  Only positions move; yaw and
extents are modeled as constant.

Noise constants below were tuned on noise-free constant-velocity scenes so
that the one-step-ahead prediction error drops below 0.1 px / 0.05 m within
ten updates.  The initial velocity variance is 1000x the position variance
(positions are observed directly, velocities are not), which lets the first
few updates pin the velocity quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import BBox2D, BBox3D, CAMERA, Detection


class MissingBox(ValueError):
    """The detection lacks the box needed for this filter's measurement."""


class NonPositiveExtent(ValueError):
    """The filter state decodes to a box with non-positive size."""


_F2 = np.eye(7)
_F2[0, 4] = _F2[1, 5] = _F2[2, 6] = 1.0
_H2 = np.eye(4, 7)
_P0_2D = np.diag([10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4])
_Q_2D = np.diag([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4])
_R_2D = np.diag([1.0, 1.0, 10.0, 10.0])

_F3 = np.eye(10)
_F3[0, 7] = _F3[1, 8] = _F3[2, 9] = 1.0
_H3 = np.eye(7, 10)
_P0_3D = np.diag([10.0] * 7 + [1e4] * 3)
_Q_3D = np.diag([1.0] * 7 + [0.01] * 3)
_R_3D = np.eye(7)


@dataclass(frozen=True)
class KF2DState:
    """Gaussian belief over an image-plane track."""

    mean: np.ndarray
    covariance: np.ndarray
    innovation: Optional[np.ndarray] = None


@dataclass(frozen=True)
class KF3DState:
    """Gaussian belief over a 3D track."""

    mean: np.ndarray
    covariance: np.ndarray
    innovation: Optional[np.ndarray] = None


KFState = Union[KF2DState, KF3DState]


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = (a + math.pi) % (2.0 * math.pi) - math.pi
    if a == -math.pi:
        a = math.pi
    return a


def _measurement_2d(box: BBox2D) -> np.ndarray:
    u, v = box.center
    return np.array([u, v, box.area, box.width / box.height])


def _measurement_3d(box: BBox3D) -> np.ndarray:
    return np.array([box.x, box.y, box.z, box.yaw, box.l, box.w, box.h])


def kf_init(det: Detection) -> KFState:
    """Start a filter from a detection: measured components from the box,
    velocities at zero with inflated variance."""
    if det.stream == CAMERA:
        if det.box2d is None:
            raise MissingBox("camera filter needs a 2D box")
        mean = np.zeros(7)
        mean[:4] = _measurement_2d(det.box2d)
        return KF2DState(mean, _P0_2D.copy())
    if det.box3d is None:
        raise MissingBox("lidar filter needs a 3D box")
    mean = np.zeros(10)
    mean[:7] = _measurement_3d(det.box3d)
    return KF3DState(mean, _P0_3D.copy())


def kf_predict(state: KFState) -> KFState:
    """Advance the belief one frame under the constant-velocity model."""
    if isinstance(state, KF2DState):
        mean = state.mean.copy()
        # A negative predicted area would make the box undecodable; freeze the
        # area velocity instead, as the standard image-plane filter does.
        if mean[2] + mean[6] <= 0:
            mean[6] = 0.0
        mean = _F2 @ mean
        cov = _F2 @ state.covariance @ _F2.T + _Q_2D
        return KF2DState(mean, 0.5 * (cov + cov.T))
    mean = _F3 @ state.mean
    cov = _F3 @ state.covariance @ _F3.T + _Q_3D
    return KF3DState(mean, 0.5 * (cov + cov.T))


def _update(mean, cov, z, H, R, wrap_index=None):
    innovation = z - H @ mean
    if wrap_index is not None:
        innovation[wrap_index] = wrap_angle(innovation[wrap_index])
    S = H @ cov @ H.T + R
    K = np.linalg.solve(S, H @ cov).T
    new_mean = mean + K @ innovation
    # Joseph form keeps the covariance symmetric positive definite.
    ikh = np.eye(len(mean)) - K @ H
    new_cov = ikh @ cov @ ikh.T + K @ R @ K.T
    return new_mean, 0.5 * (new_cov + new_cov.T), innovation


def kf_update(state: KFState, det: Detection) -> KFState:
    """Condition the belief on a detection's box."""
    if isinstance(state, KF2DState):
        if det.box2d is None:
            raise MissingBox("2D update needs a detection with a 2D box")
        mean, cov, innovation = _update(
            state.mean, state.covariance, _measurement_2d(det.box2d), _H2, _R_2D
        )
        return KF2DState(mean, cov, innovation)
    if det.box3d is None:
        raise MissingBox("3D update needs a detection with a 3D box")
    mean, cov, innovation = _update(
        state.mean, state.covariance, _measurement_3d(det.box3d), _H3, _R_3D, wrap_index=3
    )
    return KF3DState(mean, cov, innovation)


def kf_box(state: KFState) -> Union[BBox2D, BBox3D]:
    """Decode the state mean back into a box."""
    if isinstance(state, KF2DState):
        u, v, s, r = state.mean[:4]
        if s <= 0 or r <= 0:
            raise NonPositiveExtent(f"area/aspect must be positive, got s={s}, r={r}")
        w = math.sqrt(s * r)
        h = s / w
        return BBox2D(u - 0.5 * w, v - 0.5 * h, u + 0.5 * w, v + 0.5 * h)
    x, y, z, yaw, l, w, h = state.mean[:7]
    if l <= 0 or w <= 0 or h <= 0:
        raise NonPositiveExtent(f"extents must be positive, got ({l}, {w}, {h})")
    return BBox3D(x, y, z, l, w, h, wrap_angle(yaw))
