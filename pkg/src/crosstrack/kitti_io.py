"""KITTI-style text formats: calibration, detections, tracking, scenarios.

All writers are atomic (tmp file + rename), emit floats with six decimals,
and canonicalize the truncation/occlusion/alpha columns to zero, so
export -> ingest -> export reproduces files byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import fields as dataclass_fields
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .core import BBox2D, BBox3D, CAMERA, Calibration, Detection, LIDAR, TrackerConfig
from .geometry import ProjectionError, project_box_3d
from .sim import FaultEvent, Scenario


class TrackingRow(NamedTuple):
    frame: int
    track_id: int
    label: str
    box2d: BBox2D
    box3d: BBox3D
    score: float


def _write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if line:
                yield lineno, line


# -- calibration --------------------------------------------------------------

def load_calibration(path) -> Calibration:
    """Read a KITTI-style calib file; uses the P2 projection.  An optional
    ``IMG_SIZE: width height`` line sets the image size (default 1242x375)."""
    projection = None
    width, height = 1242, 375
    for lineno, line in _data_lines(path):
        if ":" not in line:
            continue
        key, rest = line.split(":", 1)
        key = key.strip()
        if key == "P2":
            vals = [float(v) for v in rest.split()]
            if len(vals) != 12:
                raise ValueError(f"{path}:{lineno}: P2 needs 12 values, got {len(vals)}")
            projection = np.array(vals).reshape(3, 4)
        elif key == "IMG_SIZE":
            vals = rest.split()
            if len(vals) != 2:
                raise ValueError(f"{path}:{lineno}: IMG_SIZE needs 2 values")
            width, height = int(vals[0]), int(vals[1])
    if projection is None:
        raise ValueError(f"{path}: no P2 line found")
    return Calibration(projection, width, height)


def save_calibration(calib: Calibration, path) -> None:
    p = " ".join(f"{v:.6f}" for v in calib.projection.ravel())
    _write_text(path, f"P2: {p}\nIMG_SIZE: {calib.image_width} {calib.image_height}\n")


# -- detections ---------------------------------------------------------------

def save_detections_2d(dets_by_frame: Dict[int, List[Detection]], path) -> None:
    """``frame -1 type trunc occ alpha left top right bottom score`` lines."""
    lines = []
    for frame in sorted(dets_by_frame):
        for det in dets_by_frame[frame]:
            b = det.box2d
            lines.append(
                f"{frame} -1 {det.label} 0 0 0.000000 "
                f"{b.left:.6f} {b.top:.6f} {b.right:.6f} {b.bottom:.6f} {det.score:.6f}"
            )
    _write_text(path, "".join(l + "\n" for l in lines))


def load_detections_2d(path) -> Dict[int, List[Detection]]:
    out: Dict[int, List[Detection]] = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 11:
            raise ValueError(f"{path}:{lineno}: expected 11 fields, got {len(parts)}")
        frame = int(parts[0])
        box = BBox2D(float(parts[6]), float(parts[7]), float(parts[8]), float(parts[9]))
        bucket = out.setdefault(frame, [])
        det = Detection(
            frame=frame, stream=CAMERA, score=float(parts[10]), box2d=box,
            label=parts[2], det_id=f"{CAMERA}:{frame}:{len(bucket)}",
        )
        bucket.append(det)
    return out


def _label_line(frame: int, track_id: int, label: str, box2d: BBox2D, box3d: BBox3D, score: float) -> str:
    return (
        f"{frame} {track_id} {label} 0 0 0.000000 "
        f"{box2d.left:.6f} {box2d.top:.6f} {box2d.right:.6f} {box2d.bottom:.6f} "
        f"{box3d.h:.6f} {box3d.w:.6f} {box3d.l:.6f} "
        f"{box3d.x:.6f} {box3d.y:.6f} {box3d.z:.6f} {box3d.yaw:.6f} {score:.6f}"
    )


def _parse_label_line(path, lineno: int, line: str) -> TrackingRow:
    parts = line.split()
    if len(parts) != 18:
        raise ValueError(f"{path}:{lineno}: expected 18 fields, got {len(parts)}")
    frame = int(parts[0])
    track_id = int(parts[1])
    box2d = BBox2D(float(parts[6]), float(parts[7]), float(parts[8]), float(parts[9]))
    h, w, l = float(parts[10]), float(parts[11]), float(parts[12])
    x, y, z = float(parts[13]), float(parts[14]), float(parts[15])
    box3d = BBox3D(x, y, z, l, w, h, float(parts[16]))
    return TrackingRow(frame, track_id, parts[2], box2d, box3d, float(parts[17]))


def _fallback_box2d() -> BBox2D:
    return BBox2D(0.0, 0.0, 1.0, 1.0)


def _quantized_box3d(box: BBox3D) -> BBox3D:
    """The box as it reads back from a six-decimal text file.  Projecting
    from this, not the full-precision box, keeps export -> ingest -> export
    byte-identical."""
    x, y, z, l, w, h, yaw = (
        float(f"{v:.6f}") for v in (box.x, box.y, box.z, box.l, box.w, box.h, box.yaw)
    )
    # a yaw within half a quantum of +/-pi rounds outside the valid range
    yaw = min(max(yaw, -3.141592), 3.141592)
    return BBox3D(x, y, z, l, w, h, yaw)


def save_detections_3d(dets_by_frame: Dict[int, List[Detection]], calib: Calibration, path) -> None:
    """KITTI tracking label layout with track id -1 and a trailing score;
    the 2D columns hold the projected 3D box."""
    lines = []
    for frame in sorted(dets_by_frame):
        for det in dets_by_frame[frame]:
            box3d = _quantized_box3d(det.box3d)
            try:
                box2d = project_box_3d(box3d, calib)
            except ProjectionError:
                box2d = _fallback_box2d()
            lines.append(_label_line(frame, -1, det.label, box2d, box3d, det.score))
    _write_text(path, "".join(l + "\n" for l in lines))


def load_detections_3d(path) -> Dict[int, List[Detection]]:
    out: Dict[int, List[Detection]] = {}
    for lineno, line in _data_lines(path):
        row = _parse_label_line(path, lineno, line)
        bucket = out.setdefault(row.frame, [])
        det = Detection(
            frame=row.frame, stream=LIDAR, score=row.score, box3d=row.box3d,
            label=row.label, det_id=f"{LIDAR}:{row.frame}:{len(bucket)}",
        )
        bucket.append(det)
    return out


def frames_to_list(dets_by_frame: Dict[int, List[Detection]], n_frames: int) -> List[List[Detection]]:
    """Contiguous per-frame lists from a sparse frame dict."""
    if dets_by_frame and max(dets_by_frame) >= n_frames:
        raise ValueError(
            f"detections reach frame {max(dets_by_frame)}, beyond n_frames={n_frames}"
        )
    return [list(dets_by_frame.get(f, ())) for f in range(n_frames)]


# -- tracking output ----------------------------------------------------------

def save_tracking(outputs, path) -> None:
    """One KITTI tracking line per emitted track and frame."""
    lines = []
    for of in outputs:
        for e in of.entries:
            lines.append(_label_line(of.frame, e.track_id, e.label, e.box2d, e.box3d, e.score))
    _write_text(path, "".join(l + "\n" for l in lines))


def load_tracking(path) -> List[TrackingRow]:
    return [_parse_label_line(path, lineno, line) for lineno, line in _data_lines(path)]


def tracking_frames_2d(rows: List[TrackingRow]) -> Dict[int, List[Tuple[int, BBox2D]]]:
    """Adapt parsed tracking rows for the evaluator."""
    out: Dict[int, List[Tuple[int, BBox2D]]] = {}
    for row in rows:
        out.setdefault(row.frame, []).append((row.track_id, row.box2d))
    return out


# -- scenario export ----------------------------------------------------------

def save_gt(scn: Scenario, path) -> None:
    lines = []
    by_frame: Dict[int, List[Tuple[int, BBox3D]]] = {}
    for gt_id in sorted(scn.gt_tracks):
        for frame, box in sorted(scn.gt_tracks[gt_id].items()):
            by_frame.setdefault(frame, []).append((gt_id, box))
    for frame in sorted(by_frame):
        for gt_id, box in by_frame[frame]:
            box = _quantized_box3d(box)
            try:
                box2d = project_box_3d(box, scn.calib)
            except ProjectionError:
                box2d = _fallback_box2d()
            lines.append(_label_line(frame, gt_id, "Car", box2d, box, 1.0))
    _write_text(path, "".join(l + "\n" for l in lines))


def load_gt(path) -> List[TrackingRow]:
    return load_tracking(path)


def save_faults(fault_log: List[FaultEvent], path) -> None:
    lines = [
        f"{ev.frame} {ev.stream} {'-' if ev.gt_id is None else ev.gt_id} {ev.kind}"
        for ev in fault_log
    ]
    _write_text(path, "".join(l + "\n" for l in lines))


def load_faults(path) -> List[FaultEvent]:
    out = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        gt_id = None if parts[2] == "-" else int(parts[2])
        out.append(FaultEvent(int(parts[0]), parts[1], gt_id, parts[3]))
    return out


def save_detmap(det_gt: Dict[str, int], path) -> None:
    lines = [f"{det_id} {gt_id}" for det_id, gt_id in sorted(det_gt.items())]
    _write_text(path, "".join(l + "\n" for l in lines))


def load_detmap(path) -> Dict[str, int]:
    out = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
        out[parts[0]] = int(parts[1])
    return out


def export_scenario(scn: Scenario, seq_dir) -> None:
    """Write a scenario as a sequence directory the track command can read:
    calib.txt, dets_camera.txt, dets_lidar.txt, gt.txt, faults.txt,
    detmap.txt, meta.txt."""
    os.makedirs(seq_dir, exist_ok=True)
    save_calibration(scn.calib, os.path.join(seq_dir, "calib.txt"))
    cam = {f: scn.camera_dets[f] for f in range(scn.n_frames) if scn.camera_dets[f]}
    lid = {f: scn.lidar_dets[f] for f in range(scn.n_frames) if scn.lidar_dets[f]}
    save_detections_2d(cam, os.path.join(seq_dir, "dets_camera.txt"))
    save_detections_3d(lid, scn.calib, os.path.join(seq_dir, "dets_lidar.txt"))
    save_gt(scn, os.path.join(seq_dir, "gt.txt"))
    save_faults(scn.fault_log, os.path.join(seq_dir, "faults.txt"))
    save_detmap(scn.det_gt, os.path.join(seq_dir, "detmap.txt"))
    _write_text(os.path.join(seq_dir, "meta.txt"), f"n_frames {scn.n_frames}\n")


def load_meta(path) -> int:
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) == 2 and parts[0] == "n_frames":
            return int(parts[1])
    raise ValueError(f"{path}: no n_frames entry")


def load_scenario(seq_dir) -> Scenario:
    """Rebuild a scenario from an exported sequence directory."""
    calib = load_calibration(os.path.join(seq_dir, "calib.txt"))
    n_frames = load_meta(os.path.join(seq_dir, "meta.txt"))
    camera = frames_to_list(load_detections_2d(os.path.join(seq_dir, "dets_camera.txt")), n_frames)
    lidar = frames_to_list(load_detections_3d(os.path.join(seq_dir, "dets_lidar.txt")), n_frames)
    gt_tracks: Dict[int, Dict[int, BBox3D]] = {}
    for row in load_gt(os.path.join(seq_dir, "gt.txt")):
        gt_tracks.setdefault(row.track_id, {})[row.frame] = row.box3d
    fault_log = load_faults(os.path.join(seq_dir, "faults.txt"))
    det_gt = load_detmap(os.path.join(seq_dir, "detmap.txt"))
    return Scenario(calib, n_frames, gt_tracks, camera, lidar, fault_log, det_gt)


# -- configuration ------------------------------------------------------------

def load_config(path, base: Optional[TrackerConfig] = None) -> TrackerConfig:
    """Flat key-value text, one ``name value`` (or ``name = value``) pair per
    line, ``#`` comments allowed; keys mirror TrackerConfig field names."""
    base = base if base is not None else TrackerConfig()
    valid = {f.name: f.type for f in dataclass_fields(TrackerConfig)}
    changes = {}
    for lineno, line in _data_lines(path):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace("=", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'key value', got {line!r}")
        key, value = parts
        if key not in valid:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in ("theta_hits", "max_age", "min_output_hits"):
            changes[key] = int(value)
        else:
            changes[key] = float(value)
    return base.replace(**changes)


def save_config(cfg: TrackerConfig, path) -> None:
    lines = []
    for f in dataclass_fields(TrackerConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} {v:.6f}" if isinstance(v, float) else f"{f.name} {v}")
    _write_text(path, "".join(l + "\n" for l in lines))
