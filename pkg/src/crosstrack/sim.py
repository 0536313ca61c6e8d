"""Deterministic synthetic scenes with dual-stream detections and injected faults.

Objects follow piecewise-constant-velocity paths inside the camera frustum
(velocities reflect off the frustum walls).  Per object and frame, the fault
model can drop the camera detection, the LiDAR detection, or both at once;
per frame it can add false detections placed away from every real object.
Everything is driven by a counter-based PRNG (Philox) keyed by the seed, so
a (spec, seed) pair regenerates the identical scenario on any platform.

``scripted_case`` builds minimal hand-written scenes that each exercise one
cross-correction path of the tracker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from .affinity import OracleSimilarity
from .core import BBox2D, BBox3D, CAMERA, Calibration, Detection, LIDAR, TrackerConfig, default_config
from .geometry import ProjectionError, iou_2d, project_box_3d

FAULT_MISS = "miss"
FAULT_FALSE = "false"

_Z_MIN, _Z_MAX = 10.0, 50.0
_X_FRAC = 0.3          # |x| <= frac * z keeps objects well inside the frustum
_MAX_OBJECTS = 12
_PLACEMENT_TRIES = 40
_FALSE_IOU_CAP = 0.2   # false detections never overlap ground truth above this
_FALSE_CLEARANCE_M = 3.0


class InfeasibleScene(ValueError):
    """The requested scene cannot be laid out inside the camera frustum."""


class FaultEvent(NamedTuple):
    frame: int
    stream: str
    gt_id: Optional[int]
    kind: str


@dataclass(frozen=True)
class FaultSpec:
    """Failure-injection parameters.

    Per object-frame: with ``p_miss_both`` both detections drop; otherwise
    each stream drops independently with its own probability.  Per frame and
    stream, the false-detection count is Poisson with the given mean.  Noise
    is zero-mean Gaussian on the camera box center (pixels) and the LiDAR
    centroid (meters).
    """

    p_miss_cam: float = 0.0
    p_miss_lidar: float = 0.0
    p_miss_both: float = 0.0
    p_false_cam: float = 0.0
    p_false_lidar: float = 0.0
    pos_noise_px: float = 0.0
    pos_noise_m: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_miss_cam", "p_miss_lidar", "p_miss_both", "p_false_cam", "p_false_lidar"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")
            if name.startswith("p_miss") and v > 1:
                raise ValueError(f"{name} is a probability, got {v}")
        for name in ("pos_noise_px", "pos_noise_m"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


@dataclass
class Scenario:
    """Ground truth plus the faulted detections derived from it."""

    calib: Calibration
    n_frames: int
    gt_tracks: Dict[int, Dict[int, BBox3D]]
    camera_dets: List[List[Detection]]
    lidar_dets: List[List[Detection]]
    fault_log: List[FaultEvent] = field(default_factory=list)
    det_gt: Dict[str, int] = field(default_factory=dict)


def default_calibration() -> Calibration:
    """A KITTI-like pinhole camera: 700 px focal length, 1242x375 image."""
    projection = np.array(
        [
            [700.0, 0.0, 621.0, 0.0],
            [0.0, 700.0, 187.5, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    return Calibration(projection, 1242, 375)


def _det_id(stream: str, frame: int, index: int) -> str:
    return f"{stream}:{frame}:{index}"


def oracle_provider(scn: Scenario) -> OracleSimilarity:
    """Similarity provider that knows the scenario's true identities."""
    return OracleSimilarity(scn.det_gt)


def gt_frames_2d(scn: Scenario) -> Dict[int, List]:
    """Ground truth projected to the image, frame -> [(gt_id, BBox2D)].
    Boxes that fall entirely outside the image are skipped."""
    out: Dict[int, List] = {f: [] for f in range(scn.n_frames)}
    for gt_id in sorted(scn.gt_tracks):
        for frame, box in sorted(scn.gt_tracks[gt_id].items()):
            try:
                out[frame].append((gt_id, project_box_3d(box, scn.calib)))
            except ProjectionError:
                pass
    return out


def _camera_detection(
    box3d: BBox3D,
    calib: Calibration,
    frame: int,
    index: int,
    score: float,
    du: float = 0.0,
    dv: float = 0.0,
) -> Detection:
    box = project_box_3d(box3d, calib).shifted(du, dv)
    left = max(box.left, 0.0)
    top = max(box.top, 0.0)
    right = min(box.right, float(calib.image_width))
    bottom = min(box.bottom, float(calib.image_height))
    if left >= right or top >= bottom:
        # Noise pushed the box out of the image; fall back to the clean
        # projection so the emission still happens.
        clipped = project_box_3d(box3d, calib)
    else:
        clipped = BBox2D(left, top, right, bottom)
    return Detection(
        frame=frame,
        stream=CAMERA,
        score=score,
        box2d=clipped,
        det_id=_det_id(CAMERA, frame, index),
    )


def _lidar_detection(
    box3d: BBox3D, frame: int, index: int, score: float
) -> Detection:
    return Detection(
        frame=frame,
        stream=LIDAR,
        score=score,
        box3d=box3d,
        det_id=_det_id(LIDAR, frame, index),
    )


def generate(n_objects: int, n_frames: int, spec: FaultSpec) -> Scenario:
    """Generate a random scene and its faulted detections.

    Objects are spawned in distinct depth bands and move with reflecting
    constant velocity; every ground-truth box projects fully inside the
    image.  Raises InfeasibleScene when more objects are requested than the
    frustum layout supports.
    """
    if n_objects < 1:
        raise ValueError(f"n_objects must be >= 1, got {n_objects}")
    if n_frames < 2:
        raise ValueError(f"n_frames must be >= 2, got {n_frames}")
    if n_objects > _MAX_OBJECTS:
        raise InfeasibleScene(
            f"cannot place {n_objects} objects in distinct depth bands (max {_MAX_OBJECTS})"
        )

    calib = default_calibration()
    rng = np.random.Generator(np.random.Philox(key=spec.seed))

    band = (45.0 - 12.0) / n_objects
    states = []
    dims = []
    for i in range(n_objects):
        z0 = 12.0 + band * (i + rng.uniform(0.2, 0.8))
        x0 = rng.uniform(-0.28, 0.28) * z0
        y0 = rng.uniform(0.75, 1.15)
        l = rng.uniform(3.6, 4.6)
        w = rng.uniform(1.6, 1.9)
        h = rng.uniform(1.4, 1.6)
        yaw = rng.uniform(-math.pi, math.pi)
        vx = rng.uniform(-0.12, 0.12)
        vz = rng.uniform(-0.25, 0.25)
        states.append([x0, y0, z0, vx, vz])
        dims.append((l, w, h, yaw))

    gt_tracks: Dict[int, Dict[int, BBox3D]] = {i: {} for i in range(n_objects)}
    for f in range(n_frames):
        for i, st in enumerate(states):
            x, y, z, vx, vz = st
            l, w, h, yaw = dims[i]
            gt_tracks[i][f] = BBox3D(x, y, z, l, w, h, yaw)
            z += vz
            if z < _Z_MIN or z > _Z_MAX:
                vz = -vz
                z = min(max(z, _Z_MIN), _Z_MAX)
            x += vx
            limit = _X_FRAC * z
            if abs(x) > limit:
                vx = -vx
                x = math.copysign(limit, x)
            st[0], st[1], st[2], st[3], st[4] = x, y, z, vx, vz

    camera_dets: List[List[Detection]] = []
    lidar_dets: List[List[Detection]] = []
    fault_log: List[FaultEvent] = []
    det_gt: Dict[str, int] = {}

    for f in range(n_frames):
        cam_frame: List[Detection] = []
        lid_frame: List[Detection] = []
        gt_boxes_2d = [project_box_3d(gt_tracks[i][f], calib) for i in range(n_objects)]

        for i in range(n_objects):
            u = rng.random(3)
            dual = u[0] < spec.p_miss_both
            miss_c = dual or u[1] < spec.p_miss_cam
            miss_l = dual or u[2] < spec.p_miss_lidar
            box3d = gt_tracks[i][f]

            if miss_c:
                fault_log.append(FaultEvent(f, CAMERA, i, FAULT_MISS))
            else:
                du, dv = rng.normal(0.0, spec.pos_noise_px, 2) if spec.pos_noise_px > 0 else (0.0, 0.0)
                score = rng.uniform(0.8, 1.0)
                det = _camera_detection(box3d, calib, f, len(cam_frame), score, du, dv)
                det_gt[det.det_id] = i
                cam_frame.append(det)

            if miss_l:
                fault_log.append(FaultEvent(f, LIDAR, i, FAULT_MISS))
            else:
                if spec.pos_noise_m > 0:
                    dx, dy, dz = rng.normal(0.0, spec.pos_noise_m, 3)
                else:
                    dx, dy, dz = 0.0, 0.0, 0.0
                noisy = BBox3D(
                    box3d.x + dx, box3d.y + dy, box3d.z + dz,
                    box3d.l, box3d.w, box3d.h, box3d.yaw,
                )
                score = rng.uniform(0.8, 1.0)
                det = _lidar_detection(noisy, f, len(lid_frame), score)
                det_gt[det.det_id] = i
                lid_frame.append(det)

        n_false_c = int(rng.poisson(spec.p_false_cam)) if spec.p_false_cam > 0 else 0
        for _ in range(n_false_c):
            for _try in range(_PLACEMENT_TRIES):
                cu = rng.uniform(80.0, calib.image_width - 80.0)
                cv = rng.uniform(60.0, calib.image_height - 60.0)
                bw = rng.uniform(40.0, 140.0)
                bh = rng.uniform(30.0, 100.0)
                cand = BBox2D(
                    max(cu - bw / 2, 0.0),
                    max(cv - bh / 2, 0.0),
                    min(cu + bw / 2, float(calib.image_width)),
                    min(cv + bh / 2, float(calib.image_height)),
                )
                if all(iou_2d(cand, g) <= _FALSE_IOU_CAP for g in gt_boxes_2d):
                    score = rng.uniform(0.5, 0.9)
                    det = Detection(
                        frame=f, stream=CAMERA, score=score, box2d=cand,
                        det_id=_det_id(CAMERA, f, len(cam_frame)),
                    )
                    cam_frame.append(det)
                    fault_log.append(FaultEvent(f, CAMERA, None, FAULT_FALSE))
                    break

        n_false_l = int(rng.poisson(spec.p_false_lidar)) if spec.p_false_lidar > 0 else 0
        for _ in range(n_false_l):
            for _try in range(_PLACEMENT_TRIES):
                z = rng.uniform(_Z_MIN, _Z_MAX)
                x = rng.uniform(-0.28, 0.28) * z
                y = rng.uniform(0.75, 1.15)
                yaw = rng.uniform(-math.pi, math.pi)
                cand3d = BBox3D(x, y, z, 4.2, 1.7, 1.5, yaw)
                clear = all(
                    math.dist((x, y, z), gt_tracks[i][f].centroid) > _FALSE_CLEARANCE_M
                    for i in range(n_objects)
                )
                if not clear:
                    continue
                cand2d = project_box_3d(cand3d, calib)
                if all(iou_2d(cand2d, g) <= _FALSE_IOU_CAP for g in gt_boxes_2d):
                    score = rng.uniform(0.5, 0.9)
                    det = Detection(
                        frame=f, stream=LIDAR, score=score, box3d=cand3d,
                        det_id=_det_id(LIDAR, f, len(lid_frame)),
                    )
                    lid_frame.append(det)
                    fault_log.append(FaultEvent(f, LIDAR, None, FAULT_FALSE))
                    break

        camera_dets.append(cam_frame)
        lidar_dets.append(lid_frame)

    return Scenario(calib, n_frames, gt_tracks, camera_dets, lidar_dets, fault_log, det_gt)


_SCRIPTED_CASES = ("a", "b", "c", "d", "e", "boundary")


def scripted_case(case: str, cfg: Optional[TrackerConfig] = None) -> Scenario:
    """A minimal noiseless scene exercising exactly one correction path.

    a         LiDAR first sees an object the camera already tracks
    b         an object appears in both streams at once, mid-sequence
    c         the camera drops an established object for two frames
    d         the LiDAR drops an established object for two frames
    e         both streams drop the object for one frame, mid-image
    boundary  both streams drop the object while it leaves the image; the
              tracker must not bridge this one
    """
    if case not in _SCRIPTED_CASES:
        raise ValueError(f"unknown scripted case {case!r}, expected one of {_SCRIPTED_CASES}")
    cfg = cfg if cfg is not None else default_config()
    calib = default_calibration()
    n_frames = 12
    score = 0.9

    if case == "boundary":
        x0, vx, y, z = 4.0, 0.9, 0.95, 14.0
    else:
        x0, vx, y, z = -3.0, 0.5, 0.95, 18.0
    l, w, h, yaw = 4.2, 1.7, 1.5, 0.0

    if case == "a":
        gt_frames = range(n_frames)
        cam_miss: set = set()
        lid_miss = {0, 1}
    elif case == "b":
        gt_frames = range(3, n_frames)
        cam_miss = set()
        lid_miss = set()
    elif case == "c":
        gt_frames = range(n_frames)
        cam_miss = {5, 6}
        lid_miss = set()
    elif case == "d":
        gt_frames = range(n_frames)
        cam_miss = set()
        lid_miss = {5, 6}
    elif case == "e":
        gt_frames = range(n_frames)
        cam_miss = {5}
        lid_miss = {5}
    else:  # boundary: the object exits through the right edge
        gt_frames = range(n_frames)
        cam_miss = set(range(7, n_frames))
        lid_miss = set(range(7, n_frames))

    gt: Dict[int, BBox3D] = {}
    for f in gt_frames:
        gt[f] = BBox3D(x0 + vx * f, y, z, l, w, h, yaw)

    camera_dets: List[List[Detection]] = []
    lidar_dets: List[List[Detection]] = []
    fault_log: List[FaultEvent] = []
    det_gt: Dict[str, int] = {}
    for f in range(n_frames):
        cam_frame: List[Detection] = []
        lid_frame: List[Detection] = []
        if f in gt:
            if f in cam_miss:
                fault_log.append(FaultEvent(f, CAMERA, 0, FAULT_MISS))
            else:
                det = _camera_detection(gt[f], calib, f, 0, score)
                det_gt[det.det_id] = 0
                cam_frame.append(det)
            if f in lid_miss:
                fault_log.append(FaultEvent(f, LIDAR, 0, FAULT_MISS))
            else:
                det = _lidar_detection(gt[f], f, 0, score)
                det_gt[det.det_id] = 0
                lid_frame.append(det)
        camera_dets.append(cam_frame)
        lidar_dets.append(lid_frame)

    return Scenario(calib, n_frames, {0: gt}, camera_dets, lidar_dets, fault_log, det_gt)
