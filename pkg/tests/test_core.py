import math

import numpy as np
import pytest

from crosstrack.core import (
    BBox2D,
    BBox3D,
    CAMERA,
    Calibration,
    Detection,
    LIDAR,
    TrackerConfig,
    default_config,
)


class TestBBox2D:
    def test_properties(self):
        b = BBox2D(10.0, 20.0, 50.0, 40.0)
        assert b.width == 40.0
        assert b.height == 20.0
        assert b.area == 800.0
        assert b.center == (30.0, 30.0)

    def test_shifted(self):
        b = BBox2D(0.0, 0.0, 10.0, 10.0).shifted(5.0, -2.0)
        assert (b.left, b.top, b.right, b.bottom) == (5.0, -2.0, 15.0, 8.0)

    @pytest.mark.parametrize("coords", [
        (10, 0, 10, 5),    # zero width
        (10, 0, 5, 5),     # inverted x
        (0, 5, 10, 5),     # zero height
        (0, 8, 10, 2),     # inverted y
    ])
    def test_rejects_degenerate(self, coords):
        with pytest.raises(ValueError):
            BBox2D(*coords)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            BBox2D(0.0, 0.0, math.inf, 5.0)
        with pytest.raises(ValueError):
            BBox2D(math.nan, 0.0, 1.0, 5.0)


class TestBBox3D:
    def test_centroid(self):
        b = BBox3D(1.0, 2.0, 3.0, 4.0, 2.0, 1.5, 0.1)
        assert b.centroid == (1.0, 2.0, 3.0)

    @pytest.mark.parametrize("l,w,h", [(0, 1, 1), (1, -1, 1), (1, 1, 0)])
    def test_rejects_bad_extents(self, l, w, h):
        with pytest.raises(ValueError):
            BBox3D(0, 0, 10, l, w, h, 0.0)

    def test_yaw_range(self):
        BBox3D(0, 0, 10, 1, 1, 1, math.pi)
        BBox3D(0, 0, 10, 1, 1, 1, -math.pi)
        with pytest.raises(ValueError):
            BBox3D(0, 0, 10, 1, 1, 1, 3.5)


class TestDetection:
    def test_camera_needs_2d_box(self):
        with pytest.raises(ValueError, match="2D box"):
            Detection(frame=0, stream=CAMERA, score=0.5)

    def test_lidar_needs_3d_box(self):
        with pytest.raises(ValueError, match="3D box"):
            Detection(frame=0, stream=LIDAR, score=0.5)

    def test_unknown_stream(self):
        with pytest.raises(ValueError, match="stream"):
            Detection(frame=0, stream="radar", score=0.5)

    @pytest.mark.parametrize("score", [-0.1, 1.5, math.nan])
    def test_score_range(self, score):
        with pytest.raises(ValueError):
            Detection(frame=0, stream=CAMERA, score=score,
                      box2d=BBox2D(0, 0, 1, 1))

    def test_negative_frame(self):
        with pytest.raises(ValueError):
            Detection(frame=-1, stream=CAMERA, score=0.5, box2d=BBox2D(0, 0, 1, 1))

    def test_embedding_coerced_to_tuple(self):
        d = Detection(frame=0, stream=CAMERA, score=0.5, box2d=BBox2D(0, 0, 1, 1),
                      embedding=np.array([1.0, 2.0]))
        assert d.embedding == (1.0, 2.0)
        assert isinstance(d.embedding, tuple)

    def test_stream_box_accessor(self):
        b2 = BBox2D(0, 0, 1, 1)
        b3 = BBox3D(0, 0, 10, 1, 1, 1, 0)
        cam = Detection(frame=0, stream=CAMERA, score=0.5, box2d=b2, box3d=b3)
        lid = Detection(frame=0, stream=LIDAR, score=0.5, box2d=b2, box3d=b3)
        assert cam.box is b2
        assert lid.box is b3


class TestCalibration:
    def test_shape_check(self):
        with pytest.raises(ValueError, match="3x4"):
            Calibration(np.eye(3))

    def test_rank_check(self):
        mat = np.zeros((3, 4))
        mat[0, 0] = 1.0
        with pytest.raises(ValueError, match="rank"):
            Calibration(mat)

    def test_projection_read_only(self):
        c = Calibration(np.eye(3, 4))
        with pytest.raises(ValueError):
            c.projection[0, 0] = 2.0

    def test_equality(self):
        a = Calibration(np.eye(3, 4), 100, 50)
        b = Calibration(np.eye(3, 4), 100, 50)
        c = Calibration(np.eye(3, 4), 200, 50)
        assert a == b
        assert a != c

    def test_image_size_positive(self):
        with pytest.raises(ValueError):
            Calibration(np.eye(3, 4), 0, 50)


class TestTrackerConfig:
    def test_defaults(self):
        cfg = default_config()
        assert cfg.theta_s == 0.5
        assert cfg.theta_g_2d == 0.7
        assert cfg.theta_g_3d == 3.0
        assert cfg.theta_iou == 0.3
        assert cfg.theta_hits == 3
        assert cfg.max_age == 3
        assert cfg.min_output_hits == 1

    def test_replace_returns_new(self):
        cfg = default_config()
        other = cfg.replace(max_age=5)
        assert other.max_age == 5
        assert cfg.max_age == 3
        assert other.theta_s == cfg.theta_s

    @pytest.mark.parametrize("changes", [
        {"theta_s": 1.2},
        {"theta_g_2d": -0.1},
        {"theta_g_3d": 0.0},
        {"theta_iou": 2.0},
        {"theta_hits": 0},
        {"max_age": 0},
        {"boundary_margin": -1.0},
        {"sentinel": 1.0},
        {"min_output_hits": 0},
    ])
    def test_validation(self, changes):
        with pytest.raises(ValueError):
            default_config().replace(**changes)
