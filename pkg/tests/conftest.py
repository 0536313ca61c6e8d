import pytest

from crosstrack.core import BBox2D, BBox3D, CAMERA, LIDAR, Detection
from crosstrack.sim import default_calibration


@pytest.fixture
def calib():
    return default_calibration()


def box2d(cx, cy, w=40.0, h=20.0):
    return BBox2D(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def box3d(x, z, y=1.0, l=3.9, w=1.6, h=1.5, yaw=0.0):
    return BBox3D(x, y, z, l, w, h, yaw)


def cam_det(frame, cx, cy, score=0.9, idx=0, **kw):
    return Detection(
        frame=frame, stream=CAMERA, score=score, box2d=box2d(cx, cy, **kw),
        det_id=f"camera:{frame}:{idx}",
    )


def lid_det(frame, x, z, score=0.9, idx=0, **kw):
    return Detection(
        frame=frame, stream=LIDAR, score=score, box3d=box3d(x, z, **kw),
        det_id=f"lidar:{frame}:{idx}",
    )
