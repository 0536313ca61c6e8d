"""Shared domain types: boxes, detections, calibration, tracker configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np

CAMERA = "camera"
LIDAR = "lidar"
STREAMS = (CAMERA, LIDAR)

# Gate marker for inadmissible association costs.  Any attainable finite cost
# is <= 2, so this dominates every real entry.
DEFAULT_SENTINEL = 1000.0


def _check_finite(label: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{label}: value {v!r} is not finite")


@dataclass(frozen=True)
class BBox2D:
    """Axis-aligned image box in pixels, origin at the top-left corner."""

    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self) -> None:
        _check_finite("BBox2D", self.left, self.top, self.right, self.bottom)
        if self.left >= self.right or self.top >= self.bottom:
            raise ValueError(
                "BBox2D needs left < right and top < bottom, got "
                f"({self.left}, {self.top}, {self.right}, {self.bottom})"
            )

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.left + self.right), 0.5 * (self.top + self.bottom))

    def shifted(self, du: float, dv: float) -> "BBox2D":
        return BBox2D(self.left + du, self.top + dv, self.right + du, self.bottom + dv)


@dataclass(frozen=True)
class BBox3D:
    """3D box: centroid (x, y, z) in the camera frame in meters, extents
    (l, w, h) in meters, yaw about the vertical axis in radians."""

    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    yaw: float

    def __post_init__(self) -> None:
        _check_finite("BBox3D", self.x, self.y, self.z, self.l, self.w, self.h, self.yaw)
        if self.l <= 0 or self.w <= 0 or self.h <= 0:
            raise ValueError(f"BBox3D extents must be positive, got ({self.l}, {self.w}, {self.h})")
        if not (-math.pi <= self.yaw <= math.pi):
            raise ValueError(f"BBox3D yaw must lie in [-pi, pi], got {self.yaw}")

    @property
    def centroid(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class Detection:
    """One scored sensor observation at a frame in one stream.

    Camera detections must carry a 2D box, LiDAR detections a 3D box; the
    other box is optional.  ``det_id`` is an opaque identifier used to join
    externally supplied similarity scores; ``embedding`` is an optional
    appearance vector for the cosine similarity provider.  ``label`` is the
    object class string passed through to file output.
    """

    frame: int
    stream: str
    score: float
    box2d: Optional[BBox2D] = None
    box3d: Optional[BBox3D] = None
    det_id: str = ""
    label: str = "Car"
    embedding: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.stream not in STREAMS:
            raise ValueError(f"unknown stream {self.stream!r}, expected one of {STREAMS}")
        if self.frame < 0:
            raise ValueError(f"frame index must be >= 0, got {self.frame}")
        if not math.isfinite(self.score) or not (0.0 <= self.score <= 1.0):
            raise ValueError(f"detection score must lie in [0, 1], got {self.score}")
        if self.stream == CAMERA and self.box2d is None:
            raise ValueError("camera detections require a 2D box")
        if self.stream == LIDAR and self.box3d is None:
            raise ValueError("lidar detections require a 3D box")
        if self.embedding is not None and not isinstance(self.embedding, tuple):
            object.__setattr__(self, "embedding", tuple(float(v) for v in self.embedding))

    @property
    def box(self):
        """The box that defines this detection in its own stream."""
        return self.box2d if self.stream == CAMERA else self.box3d


@dataclass(frozen=True, eq=False)
class Calibration:
    """Pinhole projection matrix (3x4, KITTI P2 semantics) plus image size."""

    projection: np.ndarray
    image_width: int = 1242
    image_height: int = 375

    def __post_init__(self) -> None:
        mat = np.array(self.projection, dtype=float)
        if mat.shape != (3, 4):
            raise ValueError(f"projection must be 3x4, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("projection contains non-finite entries")
        if np.linalg.matrix_rank(mat) != 3:
            raise ValueError("projection must have full row rank")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError(
                f"image size must be positive, got {self.image_width}x{self.image_height}"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "projection", mat)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Calibration):
            return NotImplemented
        return (
            np.array_equal(self.projection, other.projection)
            and self.image_width == other.image_width
            and self.image_height == other.image_height
        )


@dataclass(frozen=True)
class TrackerConfig:
    """Thresholds and lifecycle constants for the dual-stream tracker.

    theta_s          minimum similarity for a pair to bypass the distance gate
    theta_g_2d       camera-stream distance gate, applied to 1 - IoU
    theta_g_3d       lidar-stream distance gate, meters between centroids
    theta_iou        overlap gate for all cross-stream image matching
    theta_hits       observation streak required before a gap may be bridged
    max_age          frames a track may stay unobserved and uncorrected
    boundary_margin  px; predicted boxes this close to the border count as leaving
    sentinel         cost marker for gated-out association pairs
    min_output_hits  confirmed-track streak required before emitting output
    """

    theta_s: float = 0.5
    theta_g_2d: float = 0.7
    theta_g_3d: float = 3.0
    theta_iou: float = 0.3
    theta_hits: int = 3
    max_age: int = 3
    boundary_margin: float = 10.0
    sentinel: float = DEFAULT_SENTINEL
    min_output_hits: int = 1

    def __post_init__(self) -> None:
        for name in ("theta_s", "theta_g_2d", "theta_iou"):
            v = getattr(self, name)
            if not math.isfinite(v) or not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not math.isfinite(self.theta_g_3d) or self.theta_g_3d <= 0:
            raise ValueError(f"theta_g_3d must be positive, got {self.theta_g_3d}")
        if self.theta_hits < 1:
            raise ValueError(f"theta_hits must be >= 1, got {self.theta_hits}")
        if self.max_age < 1:
            raise ValueError(f"max_age must be >= 1, got {self.max_age}")
        if not math.isfinite(self.boundary_margin) or self.boundary_margin < 0:
            raise ValueError(f"boundary_margin must be >= 0, got {self.boundary_margin}")
        # Finite association costs never exceed 2, the sentinel must dominate them.
        if not math.isfinite(self.sentinel) or self.sentinel <= 2.0:
            raise ValueError(f"sentinel must be finite and > 2, got {self.sentinel}")
        if self.min_output_hits < 1:
            raise ValueError(f"min_output_hits must be >= 1, got {self.min_output_hits}")

    def replace(self, **changes) -> "TrackerConfig":
        kwargs = {f.name: getattr(self, f.name) for f in fields(self)}
        kwargs.update(changes)
        return TrackerConfig(**kwargs)


def default_config() -> TrackerConfig:
    """Documented default configuration."""
    return TrackerConfig()
