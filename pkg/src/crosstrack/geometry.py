"""Geometric kernels: image-plane IoU, 3D centroid distance, box projection."""

from __future__ import annotations

import math

import numpy as np

from .core import BBox2D, BBox3D, Calibration

# Minimum depth for a corner to count as in front of the camera.
_MIN_DEPTH = 1e-9


class ProjectionError(Exception):
    """Base class for 3D-to-image projection failures."""


class AllBehindCamera(ProjectionError):
    """Every corner of the box is at or behind the camera plane."""


class DegenerateProjection(ProjectionError):
    """The projected hull collapses to zero area after clipping."""


def iou_2d(a: BBox2D, b: BBox2D) -> float:
    """Intersection over union of two image boxes, in [0, 1]."""
    iw = min(a.right, b.right) - max(a.left, b.left)
    if iw <= 0:
        return 0.0
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_matrix(rows, cols) -> np.ndarray:
    """Pairwise 2D IoU between two box sequences, shape (len(rows), len(cols))."""
    if not rows or not cols:
        return np.zeros((len(rows), len(cols)))
    a = np.array([[b.left, b.top, b.right, b.bottom] for b in rows])
    b = np.array([[b.left, b.top, b.right, b.bottom] for b in cols])
    a = a[:, None, :]
    b = b[None, :, :]
    iw = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return out


def centroid_distance_3d(a: BBox3D, b: BBox3D) -> float:
    """Euclidean distance between box centroids, meters."""
    return math.dist(a.centroid, b.centroid)


def box_corners_3d(box: BBox3D) -> np.ndarray:
    """The 8 corners of a 3D box, shape (8, 3), camera-frame coordinates.

    The box is rotated by ``yaw`` about the vertical (y) axis: l spans the
    rotated x direction, w the rotated z direction, h the y direction.
    """
    dx, dy, dz = 0.5 * box.l, 0.5 * box.h, 0.5 * box.w
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    corners = []
    for sx in (-dx, dx):
        for sy in (-dy, dy):
            for sz in (-dz, dz):
                corners.append(
                    (box.x + c * sx + s * sz, box.y + sy, box.z - s * sx + c * sz)
                )
    return np.array(corners)


def project_box_3d(box: BBox3D, calib: Calibration) -> BBox2D:
    """Project a 3D box into the image: axis-aligned hull of the visible
    corners, clipped to the image bounds.

    Corners at or behind the camera plane are dropped from the hull rather
    than mirrored through it.  Raises AllBehindCamera when no corner has
    positive depth and DegenerateProjection when the clipped hull has no area.
    """
    corners = box_corners_3d(box)
    hom = np.concatenate([corners, np.ones((8, 1))], axis=1) @ calib.projection.T
    depths = hom[:, 2]
    visible = depths > _MIN_DEPTH
    if not np.any(visible):
        raise AllBehindCamera(f"no corner of {box} projects in front of the camera")
    u = hom[visible, 0] / depths[visible]
    v = hom[visible, 1] / depths[visible]
    left = max(float(np.min(u)), 0.0)
    right = min(float(np.max(u)), float(calib.image_width))
    top = max(float(np.min(v)), 0.0)
    bottom = min(float(np.max(v)), float(calib.image_height))
    if left >= right or top >= bottom:
        raise DegenerateProjection(f"projected hull of {box} lies outside the image")
    return BBox2D(left, top, right, bottom)


def at_image_boundary(box: BBox2D, calib: Calibration, margin: float) -> bool:
    """True when any box edge lies within ``margin`` pixels of the image border."""
    return (
        box.left <= margin
        or box.top <= margin
        or box.right >= calib.image_width - margin
        or box.bottom >= calib.image_height - margin
    )
