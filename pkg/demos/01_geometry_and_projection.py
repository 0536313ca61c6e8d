"""
Image-plane overlap and 3D-to-image projection
==============================================

The geometric vocabulary everything else builds on: axis-aligned image
boxes, yawed 3D boxes on the ground plane, and the pinhole projection
that connects them.
"""

import numpy as np

from crosstrack import (
    BBox2D,
    BBox3D,
    at_image_boundary,
    box_corners_3d,
    centroid_distance_3d,
    default_calibration,
    iou_2d,
    iou_matrix,
    project_box_3d,
)

# two unit squares offset by half a side: intersection 0.5, union 1.5
a = BBox2D(0, 0, 1, 1)
b = BBox2D(0.5, 0, 1.5, 1)
print(f"offset squares      iou = {iou_2d(a, b):.6f}  (exact: 1/3)")

# containment: the small box covers a quarter of the big one
print(f"contained box       iou = {iou_2d(BBox2D(0, 0, 10, 10), BBox2D(2, 2, 7, 7)):.6f}")

# boxes that merely touch along an edge share no area
print(f"touching edges      iou = {iou_2d(BBox2D(0, 0, 10, 10), BBox2D(10, 0, 20, 10)):.6f}")

# the matrix form is the workhorse during association
rows = [BBox2D(0, 0, 10, 10), BBox2D(5, 5, 15, 15)]
cols = [BBox2D(0, 0, 10, 10), BBox2D(100, 100, 110, 110)]
print("\npairwise overlap matrix:")
print(np.array_str(iou_matrix(rows, cols), precision=4))

# A 3D box is centroid + extents + heading. Corners come out in camera
# coordinates (x right, y down, z forward).
car = BBox3D(x=2.0, y=1.0, z=20.0, l=3.9, w=1.6, h=1.5, yaw=0.3)
corners = box_corners_3d(car)
print(f"\n3D corner spans     x [{corners[:, 0].min():+.2f} {corners[:, 0].max():+.2f}]"
      f"  z [{corners[:, 2].min():+.2f} {corners[:, 2].max():+.2f}]")

other = BBox3D(x=5.0, y=1.0, z=24.0, l=3.9, w=1.6, h=1.5, yaw=0.0)
print(f"centroid distance   {centroid_distance_3d(car, other):.4f} m")

# Project the yawed box into the default image (1242 x 375, f = 700).
calib = default_calibration()
img = project_box_3d(car, calib)
print(f"\nprojected box       ({img.left:.1f}, {img.top:.1f}) .. ({img.right:.1f}, {img.bottom:.1f})")

# The tracker refuses to invent measurements for objects about to leave
# the frame; this predicate is how it knows.
inside = project_box_3d(BBox3D(0.0, 1.0, 20.0, 3.9, 1.6, 1.5, 0.0), calib)
leaving = project_box_3d(BBox3D(12.0, 1.0, 14.0, 3.9, 1.6, 1.5, 0.0), calib)
print(f"\ncentered object     at_image_boundary = {at_image_boundary(inside, calib, 10.0)}")
print(f"object at the edge  at_image_boundary = {at_image_boundary(leaving, calib, 10.0)}"
      f"  (right edge {leaving.right:.1f} of {calib.image_width})")
