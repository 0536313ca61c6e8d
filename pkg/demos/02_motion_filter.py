"""
Constant-velocity filtering in the image and on the ground
==========================================================

Every track owns a Kalman filter. Camera tracks live in image space
(center, scale, aspect, and their rates); LiDAR tracks live in metric
space (centroid, heading, extents, velocity). Both start ignorant about
velocity and lock on within a handful of frames.
"""

import math

from crosstrack import BBox2D, BBox3D, CAMERA, LIDAR, Detection, kf_box, kf_init, kf_predict, kf_update


def cam_det(frame, cx, cy):
    return Detection(stream=CAMERA, frame=frame, score=0.9, det_id=f"camera:{frame}:0",
                     box2d=BBox2D(cx - 20, cy - 10, cx + 20, cy + 10))


def lid_det(frame, x, z):
    return Detection(stream=LIDAR, frame=frame, score=0.9, det_id=f"lidar:{frame}:0",
                     box3d=BBox3D(x, 1.0, z, 3.9, 1.6, 1.5, 0.0))


# -- image-plane filter: object drifting right and down at a fixed rate -------

print("image-plane filter, truth moves (+3.0, +1.5) px per frame")
print("frame  predicted center      one-step error")
st = kf_init(cam_det(0, 100.0, 80.0))
for f in range(1, 13):
    st = kf_predict(st)                       # covariance grows here
    cx, cy = kf_box(st).center
    tx, ty = 100 + 3.0 * f, 80 + 1.5 * f
    err = math.hypot(cx - tx, cy - ty)
    print(f"{f:5d}  ({cx:7.2f}, {cy:6.2f})    {err:10.5f} px")
    st = kf_update(st, cam_det(f, tx, ty))    # and shrinks again here

# The first prediction is pure inertia from a single observation, so it
# lags the truth by the full per-frame motion; once velocity is observable
# the error collapses toward zero.

# -- metric filter: same story in 3D -------------------------------------------

print("\nmetric filter, truth moves (+0.3, +0.8) m per frame")
print("frame  predicted (x, z)      one-step error")
st = kf_init(lid_det(0, 1.0, 20.0))
for f in range(1, 13):
    st = kf_predict(st)
    b = kf_box(st)
    tx, tz = 1.0 + 0.3 * f, 20.0 + 0.8 * f
    err = math.dist((b.x, b.y, b.z), (tx, 1.0, tz))
    print(f"{f:5d}  ({b.x:5.2f}, {b.z:6.2f})    {err:10.5f} m")
    st = kf_update(st, lid_det(f, tx, tz))

# -- the scale guard ------------------------------------------------------------

# An image-plane track whose area is shrinking fast could predict itself
# into a zero or negative area. The predict step clamps the area rate
# before that happens, so the state always converts back to a box.
st = kf_init(cam_det(0, 100.0, 80.0))
st.mean[2] = 100.0    # area
st.mean[6] = -500.0   # absurd shrink rate
st = kf_predict(st)
box = kf_box(st)
print(f"\ncollapsing box survives prediction: area {st.mean[2]:.3f}, "
      f"width {box.width:.3f}, height {box.height:.3f}")
