import math

import numpy as np
import pytest

from crosstrack.core import BBox2D, BBox3D, Calibration
from crosstrack.geometry import (
    AllBehindCamera,
    DegenerateProjection,
    at_image_boundary,
    box_corners_3d,
    centroid_distance_3d,
    iou_2d,
    iou_matrix,
    project_box_3d,
)
from crosstrack.sim import default_calibration

CELL = 0.01


def snap(v):
    return round(v / CELL) * CELL


def random_snapped_box(rng, span=300.0):
    # rejection-free: force a strictly positive snapped extent
    x0 = snap(rng.uniform(0, span))
    y0 = snap(rng.uniform(0, span))
    w = max(CELL, snap(rng.uniform(0.5, 80.0)))
    h = max(CELL, snap(rng.uniform(0.5, 80.0)))
    return BBox2D(x0, y0, x0 + w, y0 + h)


def cell_count_iou(a, b):
    """Independent overlap oracle: count 0.01 px grid cells covered by each
    box and by their intersection (exact once coordinates sit on the grid)."""
    ax0, ay0, ax1, ay1 = (round(v * 100) for v in (a.left, a.top, a.right, a.bottom))
    bx0, by0, bx1, by1 = (round(v * 100) for v in (b.left, b.top, b.right, b.bottom))
    iw = max(0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union else 0.0


def dense_raster_iou(a, b):
    """Literal boolean-grid rasterization at 0.01 px, for small boxes only."""
    x0 = min(a.left, b.left)
    y0 = min(a.top, b.top)
    nx = round((max(a.right, b.right) - x0) / CELL)
    ny = round((max(a.bottom, b.bottom) - y0) / CELL)
    xs = x0 + (np.arange(nx) + 0.5) * CELL
    ys = y0 + (np.arange(ny) + 0.5) * CELL
    in_a = np.outer((ys >= a.top) & (ys < a.bottom), (xs >= a.left) & (xs < a.right))
    in_b = np.outer((ys >= b.top) & (ys < b.bottom), (xs >= b.left) & (xs < b.right))
    inter = np.count_nonzero(in_a & in_b)
    union = np.count_nonzero(in_a | in_b)
    return inter / union if union else 0.0


class TestIoU2D:
    def test_identical(self):
        b = BBox2D(5, 5, 25, 15)
        assert iou_2d(b, b) == 1.0

    def test_disjoint(self):
        assert iou_2d(BBox2D(0, 0, 10, 10), BBox2D(20, 20, 30, 30)) == 0.0

    def test_touching_edges_do_not_overlap(self):
        assert iou_2d(BBox2D(0, 0, 10, 10), BBox2D(10, 0, 20, 10)) == 0.0

    def test_hand_value(self):
        # unit squares offset by half: inter 0.5, union 1.5
        a = BBox2D(0, 0, 1, 1)
        b = BBox2D(0.5, 0, 1.5, 1)
        assert iou_2d(a, b) == pytest.approx(1 / 3)

    def test_containment(self):
        outer = BBox2D(0, 0, 10, 10)
        inner = BBox2D(2, 2, 7, 7)
        assert iou_2d(outer, inner) == pytest.approx(25 / 100)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            a = random_snapped_box(rng)
            b = random_snapped_box(rng)
            v = iou_2d(a, b)
            assert v == iou_2d(b, a)
            assert 0.0 <= v <= 1.0

    def test_matches_cell_count_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(2000):
            a = random_snapped_box(rng)
            b = random_snapped_box(rng)
            assert iou_2d(a, b) == pytest.approx(cell_count_iou(a, b), abs=1e-3)

    def test_dense_raster_agrees_with_cell_count(self):
        # validates the fast oracle itself against brute-force rasterization
        rng = np.random.default_rng(7)
        for _ in range(60):
            a = random_snapped_box(rng, span=4.0)
            b = random_snapped_box(rng, span=4.0)
            a = BBox2D(a.left, a.top, a.left + min(a.width, 3.0), a.top + min(a.height, 3.0))
            b = BBox2D(b.left, b.top, b.left + min(b.width, 3.0), b.top + min(b.height, 3.0))
            assert dense_raster_iou(a, b) == pytest.approx(cell_count_iou(a, b), abs=1e-9)


class TestIoUMatrix:
    def test_matches_scalar(self):
        rng = np.random.default_rng(3)
        rows = [random_snapped_box(rng) for _ in range(7)]
        cols = [random_snapped_box(rng) for _ in range(5)]
        m = iou_matrix(rows, cols)
        assert m.shape == (7, 5)
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                assert m[i, j] == pytest.approx(iou_2d(a, b), abs=1e-12)

    def test_empty(self):
        assert iou_matrix([], []).shape == (0, 0)
        assert iou_matrix([BBox2D(0, 0, 1, 1)], []).shape == (1, 0)


class TestCentroidDistance:
    def test_direct_formula(self):
        a = BBox3D(1.0, 2.0, 3.0, 1, 1, 1, 0)
        b = BBox3D(4.0, 6.0, 3.0, 1, 1, 1, 0)
        assert centroid_distance_3d(a, b) == pytest.approx(5.0)

    def test_ignores_extent_and_yaw(self):
        a = BBox3D(0, 0, 10, 1, 1, 1, 0.0)
        b = BBox3D(0, 0, 10, 9, 4, 2, 1.2)
        assert centroid_distance_3d(a, b) == 0.0

    def test_random_pairs(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            p = rng.uniform(-50, 50, 6)
            a = BBox3D(p[0], p[1], p[2], 2, 2, 2, 0)
            b = BBox3D(p[3], p[4], p[5], 2, 2, 2, 0)
            want = math.sqrt((p[0] - p[3]) ** 2 + (p[1] - p[4]) ** 2 + (p[2] - p[5]) ** 2)
            assert abs(centroid_distance_3d(a, b) - want) < 1e-9


class TestBoxCorners:
    def test_axis_aligned(self):
        box = BBox3D(1.0, 2.0, 10.0, 4.0, 2.0, 1.5, 0.0)
        c = box_corners_3d(box)
        assert c.shape == (8, 3)
        assert np.min(c[:, 0]) == pytest.approx(-1.0)
        assert np.max(c[:, 0]) == pytest.approx(3.0)
        assert np.min(c[:, 1]) == pytest.approx(1.25)
        assert np.max(c[:, 1]) == pytest.approx(2.75)
        assert np.min(c[:, 2]) == pytest.approx(9.0)
        assert np.max(c[:, 2]) == pytest.approx(11.0)

    def test_quarter_turn_swaps_spans(self):
        box = BBox3D(0.0, 0.0, 0.0, 4.0, 2.0, 1.0, math.pi / 2)
        c = box_corners_3d(box)
        assert np.max(c[:, 0]) - np.min(c[:, 0]) == pytest.approx(2.0)
        assert np.max(c[:, 2]) - np.min(c[:, 2]) == pytest.approx(4.0)

    def test_single_corner_hand_rotation(self):
        yaw = 0.3
        box = BBox3D(1.0, 0.5, 8.0, 2.0, 1.0, 1.0, yaw)
        c, s = math.cos(yaw), math.sin(yaw)
        # the (+l/2, +h/2, +w/2) corner before rotation
        want = (1.0 + c * 1.0 + s * 0.5, 0.5 + 0.5, 8.0 - s * 1.0 + c * 0.5)
        corners = box_corners_3d(box)
        dists = np.linalg.norm(corners - np.array(want), axis=1)
        assert np.min(dists) < 1e-12

    def test_centroid_preserved(self):
        box = BBox3D(3.0, -1.0, 20.0, 4.0, 2.0, 1.5, 1.1)
        assert np.allclose(box_corners_3d(box).mean(axis=0), [3.0, -1.0, 20.0])


class TestProjection:
    def project_oracle(self, box, calib):
        """Per-corner reference: project each corner by explicit arithmetic."""
        P = calib.projection
        us, vs = [], []
        for cx, cy, cz in box_corners_3d(box):
            w = P[2, 0] * cx + P[2, 1] * cy + P[2, 2] * cz + P[2, 3]
            if w <= 1e-9:
                continue
            us.append((P[0, 0] * cx + P[0, 1] * cy + P[0, 2] * cz + P[0, 3]) / w)
            vs.append((P[1, 0] * cx + P[1, 1] * cy + P[1, 2] * cz + P[1, 3]) / w)
        left = max(min(us), 0.0)
        right = min(max(us), calib.image_width)
        top = max(min(vs), 0.0)
        bottom = min(max(vs), calib.image_height)
        return left, top, right, bottom

    def test_matches_per_corner_oracle(self, calib):
        rng = np.random.default_rng(9)
        n = 0
        while n < 300:
            z = rng.uniform(8, 60)
            box = BBox3D(rng.uniform(-0.25, 0.25) * z, rng.uniform(0.5, 1.5), z,
                         rng.uniform(2, 5), rng.uniform(1, 2), rng.uniform(1, 2),
                         rng.uniform(-math.pi, math.pi))
            got = project_box_3d(box, calib)
            want = self.project_oracle(box, calib)
            assert (got.left, got.top, got.right, got.bottom) == pytest.approx(want, abs=1e-9)
            n += 1

    def test_center_projection(self, calib):
        # a box dead ahead projects around the principal point
        box = BBox3D(0.0, 0.0, 20.0, 2.0, 2.0, 2.0, 0.0)
        b = project_box_3d(box, calib)
        cu, cv = b.center
        assert cu == pytest.approx(621.0, abs=1e-6)
        assert cv == pytest.approx(187.5, abs=1e-6)

    def test_behind_camera_raises(self, calib):
        with pytest.raises(AllBehindCamera):
            project_box_3d(BBox3D(0, 0, -15.0, 2, 2, 2, 0), calib)

    def test_outside_image_raises(self, calib):
        with pytest.raises(DegenerateProjection):
            project_box_3d(BBox3D(500.0, 1.0, 10.0, 2, 2, 2, 0), calib)

    def test_straddling_box_uses_visible_corners(self, calib):
        # rear corners behind the camera plane are dropped, not mirrored
        box = BBox3D(0.0, 1.0, 1.2, 2.0, 6.0, 1.5, 0.0)
        b = project_box_3d(box, calib)
        assert 0.0 <= b.left < b.right <= calib.image_width

    def test_result_clipped_to_image(self, calib):
        b = project_box_3d(BBox3D(-4.0, 1.0, 10.5, 4, 2, 2, 0.2), calib)
        assert b.left >= 0.0
        assert b.right <= calib.image_width
        assert b.top >= 0.0
        assert b.bottom <= calib.image_height


class TestAtImageBoundary:
    def test_interior(self, calib):
        assert not at_image_boundary(BBox2D(100, 100, 200, 200), calib, 10.0)

    @pytest.mark.parametrize("box", [
        BBox2D(5, 100, 80, 200),       # left
        BBox2D(100, 4, 200, 200),      # top
        BBox2D(1100, 100, 1235, 200),  # right (within 10 of 1242)
        BBox2D(100, 100, 200, 370),    # bottom (within 10 of 375)
    ])
    def test_near_edges(self, calib, box):
        assert at_image_boundary(box, calib, 10.0)

    def test_margin_inclusive(self, calib):
        assert at_image_boundary(BBox2D(10.0, 100, 200, 200), calib, 10.0)
        assert not at_image_boundary(BBox2D(10.01, 100, 200, 200), calib, 10.0)

    def test_zero_margin_only_flags_contact(self, calib):
        assert not at_image_boundary(BBox2D(0.5, 100, 200, 200), calib, 0.0)
        assert at_image_boundary(BBox2D(0.0, 100, 200, 200), calib, 0.0)
