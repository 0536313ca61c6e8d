"""Two-stage dual-stream tracker.

Stage one runs an independent tracking-by-detection step per stream
(``stream_step``): detections are associated to predicted tracks with a
fused similarity + geometry cost, matched tracks are updated, leftovers
become new unconfirmed tracks or unobserved trajectories.

Stage two corrects each stream with the other one.  Confirmed tracks that
agree across streams are paired off first (``prematch_confirmed``); the
remaining camera evidence then promotes new LiDAR tracks
(``promote_new_tracks``), bridges single-stream detection gaps
(``bridge_single_gaps``), and bridges simultaneous gaps in both streams
(``bridge_dual_gaps``).  A bridged track commits its own constant-velocity
prediction as the new state, without a measurement update, so a short
dropout neither kills the track nor switches its identity.

Output is LiDAR-led: a LiDAR track is emitted only while some camera-side
track overlaps its image projection (``select_output``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Set, Tuple

from .affinity import (
    SimilarityProvider,
    ZeroSimilarity,
    geometric_cost_matrix,
    similarity_matrix,
    total_cost,
)
from .association import greedy_match, greedy_match_iou
from .core import BBox2D, BBox3D, CAMERA, Calibration, Detection, LIDAR, TrackerConfig, default_config
from .geometry import ProjectionError, at_image_boundary, iou_2d, project_box_3d
from .motion import NonPositiveExtent, kf_box, kf_init, kf_predict, kf_update

MATCHED = "matched"
UNMATCHED_DETECTION = "unmatched_detection"
UNMATCHED_TRAJECTORY = "unmatched_trajectory"


class FrameOrderViolation(ValueError):
    """Detections or stream states are not aligned to the expected frame."""


class CalibrationMissing(ValueError):
    """Cross-stream matching needs a camera calibration."""


class Track:
    """One tracked object in one stream."""

    __slots__ = (
        "track_id",
        "stream",
        "kf",
        "hits",
        "time_since_update",
        "last_detection",
        "link_id",
        "status",
    )

    def __init__(self, track_id: int, detection: Detection):
        self.track_id = track_id
        self.stream = detection.stream
        self.kf = kf_init(detection)
        self.hits = 1
        self.time_since_update = 0
        self.last_detection = detection
        self.link_id: Optional[int] = None
        self.status = UNMATCHED_DETECTION

    def current_box(self):
        """The box decoded from the current filter state, or None if the
        state has degenerated."""
        try:
            return kf_box(self.kf)
        except NonPositiveExtent:
            return None

    def image_box(self, calib: Calibration) -> Optional[BBox2D]:
        """This track's box in the image plane: the 2D box directly for
        camera tracks, the projected 3D box for LiDAR tracks."""
        box = self.current_box()
        if box is None:
            return None
        if self.stream == CAMERA:
            return box
        try:
            return project_box_3d(box, calib)
        except ProjectionError:
            return None

    def __repr__(self) -> str:
        return (
            f"Track(id={self.track_id}, stream={self.stream}, hits={self.hits}, "
            f"tsu={self.time_since_update}, status={self.status}, link={self.link_id})"
        )


class StreamState:
    """Per-stream track sets: confirmed-and-current, born-this-frame, and
    currently unobserved trajectories."""

    def __init__(self, stream: str):
        self.stream = stream
        self.matched: List[Track] = []
        self.unmatched_dets: List[Track] = []
        self.unmatched_trajs: List[Track] = []
        self.next_frame = 0
        self._next_track_id = 1

    def all_tracks(self) -> List[Track]:
        return self.matched + self.unmatched_dets + self.unmatched_trajs

    def new_track_id(self) -> int:
        tid = self._next_track_id
        self._next_track_id += 1
        return tid

    def find(self, track_id: int) -> Optional[Track]:
        for tr in self.all_tracks():
            if tr.track_id == track_id:
                return tr
        return None

    def is_matched(self, track_id: int) -> bool:
        return any(tr.track_id == track_id for tr in self.matched)


@dataclass(frozen=True)
class CaseMask:
    """Which cross-correction paths run; used for ablations.

    Letters, as accepted by the command line: a = promote_confirmed,
    b = promote_paired, c = bridge_camera, d = bridge_lidar, e = bridge_dual.
    ``lidar_only`` drops the camera stream entirely, which turns the pipeline
    into a plain single-stream LiDAR tracker.
    """

    promote_confirmed: bool = True
    promote_paired: bool = True
    bridge_camera: bool = True
    bridge_lidar: bool = True
    bridge_dual: bool = True
    lidar_only: bool = False

    _FIELDS = (
        ("a", "promote_confirmed"),
        ("b", "promote_paired"),
        ("c", "bridge_camera"),
        ("d", "bridge_lidar"),
        ("e", "bridge_dual"),
    )

    @classmethod
    def from_letters(cls, letters: str, lidar_only: bool = False) -> "CaseMask":
        letters = letters.strip().lower()
        if letters in ("none", "-"):
            letters = ""
        valid = {l for l, _ in cls._FIELDS}
        unknown = set(letters) - valid
        if unknown:
            raise ValueError(f"unknown case letters {sorted(unknown)}; valid: a-e")
        kwargs = {field: (letter in letters) for letter, field in cls._FIELDS}
        return cls(lidar_only=lidar_only, **kwargs)

    @classmethod
    def baseline(cls) -> "CaseMask":
        return cls.from_letters("", lidar_only=True)

    def letters(self) -> str:
        if self.lidar_only:
            return "lidar-only"
        s = "".join(letter for letter, field in self._FIELDS if getattr(self, field))
        return s or "none"


@dataclass(frozen=True)
class OutputEntry:
    track_id: int
    box3d: BBox3D
    box2d: BBox2D
    score: float
    label: str = "Car"


@dataclass(frozen=True)
class OutputFrame:
    frame: int
    entries: Tuple[OutputEntry, ...]


def stream_step(
    state: StreamState,
    dets: Sequence[Detection],
    provider: SimilarityProvider,
    cfg: TrackerConfig,
) -> StreamState:
    """Advance one stream by one frame: predict all tracks, associate the
    frame's detections, and re-partition the track sets."""
    frame = state.next_frame
    for det in dets:
        if det.stream != state.stream:
            raise FrameOrderViolation(
                f"detection {det.det_id!r} belongs to stream {det.stream}, "
                f"state tracks {state.stream}"
            )
        if det.frame != frame:
            raise FrameOrderViolation(
                f"detection {det.det_id!r} is for frame {det.frame}, expected {frame}"
            )

    # Higher-scoring detections get lower column indices, so they win cost
    # ties in the greedy scan.
    dets = sorted(dets, key=lambda d: -d.score)
    priors = sorted(state.all_tracks(), key=lambda t: t.track_id)
    for tr in priors:
        tr.kf = kf_predict(tr.kf)

    matches = []
    unmatched_rows = list(range(len(priors)))
    unmatched_cols = list(range(len(dets)))
    if priors and dets:
        prior_boxes = []
        usable = []
        for i, tr in enumerate(priors):
            box = tr.current_box()
            if box is not None:
                usable.append(i)
                prior_boxes.append(box)
        if usable:
            sub = [priors[i] for i in usable]
            sim = similarity_matrix(provider, [t.last_detection for t in sub], dets)
            geo = geometric_cost_matrix(prior_boxes, dets, state.stream)
            cost = total_cost(sim, geo, cfg, state.stream)
            asg = greedy_match(cost.values, cfg.sentinel)
            matches = [(usable[r], c, v) for r, c, v in asg.matches]
            matched_rows = {r for r, _, _ in matches}
            matched_cols = {c for _, c, _ in matches}
            unmatched_rows = [i for i in range(len(priors)) if i not in matched_rows]
            unmatched_cols = [j for j in range(len(dets)) if j not in matched_cols]

    new_matched = []
    for r, c, _ in sorted(matches):
        tr = priors[r]
        det = dets[c]
        tr.kf = kf_update(tr.kf, det)
        tr.hits += 1
        tr.time_since_update = 0
        tr.last_detection = det
        tr.status = MATCHED
        new_matched.append(tr)

    new_unmatched_dets = []
    for c in unmatched_cols:
        tr = Track(state.new_track_id(), dets[c])
        new_unmatched_dets.append(tr)

    new_unmatched_trajs = []
    for r in unmatched_rows:
        tr = priors[r]
        tr.time_since_update += 1
        tr.status = UNMATCHED_TRAJECTORY
        new_unmatched_trajs.append(tr)

    state.matched = new_matched
    state.unmatched_dets = new_unmatched_dets
    state.unmatched_trajs = new_unmatched_trajs
    state.next_frame = frame + 1
    return state


def _check_aligned(lidar: StreamState, camera: StreamState) -> None:
    if lidar.next_frame != camera.next_frame:
        raise FrameOrderViolation(
            f"streams out of step: lidar at frame {lidar.next_frame}, "
            f"camera at {camera.next_frame}"
        )


def _unlink(track: Track, other: StreamState) -> None:
    if track.link_id is None:
        return
    partner = other.find(track.link_id)
    if partner is not None and partner.link_id == track.track_id:
        partner.link_id = None
    track.link_id = None


def _link(lidar_track: Track, camera_track: Track, lidar: StreamState, camera: StreamState) -> None:
    _unlink(lidar_track, camera)
    _unlink(camera_track, lidar)
    lidar_track.link_id = camera_track.track_id
    camera_track.link_id = lidar_track.track_id


def _consumed(track: Track, other: StreamState) -> bool:
    """A track is consumed for cross-correction when its link partner is
    currently in the opposite stream's matched set."""
    return track.link_id is not None and other.is_matched(track.link_id)


def _commit_correction(track: Track) -> None:
    # The predicted state stands in for the missing observation; it was
    # already advanced to this frame by stream_step.
    track.hits += 1
    track.time_since_update = 0
    track.status = MATCHED


def _expire(bucket: List[Track], own: StreamState, other: Optional[StreamState], cfg: TrackerConfig) -> None:
    for tr in list(bucket):
        if tr.time_since_update >= cfg.max_age:
            if other is not None:
                _unlink(tr, other)
            bucket.remove(tr)


def expire_tracks(state: StreamState, other: Optional[StreamState], cfg: TrackerConfig) -> None:
    """Discard tracks that stayed unobserved and uncorrected too long."""
    _expire(state.unmatched_dets, state, other, cfg)
    _expire(state.unmatched_trajs, state, other, cfg)


def prematch_confirmed(
    lidar: StreamState, camera: StreamState, calib: Calibration, cfg: TrackerConfig
) -> Set[Tuple[int, int]]:
    """Pair confirmed LiDAR tracks with confirmed camera tracks by projected
    overlap.  Paired tracks stay in their sets but are excluded from the
    correction steps.  Existing pairs survive while they still overlap;
    everything else is re-matched greedily."""
    if calib is None:
        raise CalibrationMissing("prematch needs a calibration to project LiDAR tracks")
    _check_aligned(lidar, camera)
    pairs: Set[Tuple[int, int]] = set()
    used_l: Set[int] = set()
    used_c: Set[int] = set()

    cam_by_id = {tr.track_id: tr for tr in camera.matched}
    for lt in sorted(lidar.matched, key=lambda t: t.track_id):
        ct = cam_by_id.get(lt.link_id) if lt.link_id is not None else None
        if ct is None or ct.link_id != lt.track_id:
            continue
        lbox = lt.image_box(calib)
        cbox = ct.image_box(calib)
        if lbox is not None and cbox is not None and iou_2d(lbox, cbox) >= cfg.theta_iou:
            pairs.add((lt.track_id, ct.track_id))
            used_l.add(lt.track_id)
            used_c.add(ct.track_id)
        else:
            _unlink(lt, camera)

    rows = []
    row_boxes = []
    for lt in sorted(lidar.matched, key=lambda t: t.track_id):
        if lt.track_id in used_l:
            continue
        box = lt.image_box(calib)
        if box is not None:
            rows.append(lt)
            row_boxes.append(box)
    cols = []
    col_boxes = []
    for ct in sorted(camera.matched, key=lambda t: t.track_id):
        if ct.track_id in used_c:
            continue
        box = ct.image_box(calib)
        if box is not None:
            cols.append(ct)
            col_boxes.append(box)
    for r, c, _ in greedy_match_iou(row_boxes, col_boxes, cfg.theta_iou).matches:
        _link(rows[r], cols[c], lidar, camera)
        pairs.add((rows[r].track_id, cols[c].track_id))
    return pairs


def promote_new_tracks(
    lidar: StreamState,
    camera: StreamState,
    calib: Calibration,
    cfg: TrackerConfig,
    confirmed: bool = True,
    paired: bool = True,
) -> None:
    """Turn unmatched LiDAR detections into confirmed tracks when the camera
    vouches for them: first against established camera trajectories
    (``confirmed``), then against the camera's own new detections
    (``paired``, which promotes both sides).  Finally, stale unconfirmed
    detections age out."""
    _check_aligned(lidar, camera)

    if confirmed and lidar.unmatched_dets and camera.matched:
        rows, row_boxes = [], []
        for lt in sorted(lidar.unmatched_dets, key=lambda t: t.track_id):
            box = lt.image_box(calib)
            if box is not None:
                rows.append(lt)
                row_boxes.append(box)
        cols, col_boxes = [], []
        for ct in sorted(camera.matched, key=lambda t: t.track_id):
            if _consumed(ct, lidar):
                continue
            box = ct.image_box(calib)
            if box is not None:
                cols.append(ct)
                col_boxes.append(box)
        for r, c, _ in greedy_match_iou(row_boxes, col_boxes, cfg.theta_iou).matches:
            lt, ct = rows[r], cols[c]
            lidar.unmatched_dets.remove(lt)
            lt.status = MATCHED
            lidar.matched.append(lt)
            _link(lt, ct, lidar, camera)

    if paired and lidar.unmatched_dets and camera.unmatched_dets:
        rows, row_boxes = [], []
        for lt in sorted(lidar.unmatched_dets, key=lambda t: t.track_id):
            box = lt.image_box(calib)
            if box is not None:
                rows.append(lt)
                row_boxes.append(box)
        cols, col_boxes = [], []
        for ct in sorted(camera.unmatched_dets, key=lambda t: t.track_id):
            box = ct.image_box(calib)
            if box is not None:
                cols.append(ct)
                col_boxes.append(box)
        for r, c, _ in greedy_match_iou(row_boxes, col_boxes, cfg.theta_iou).matches:
            lt, ct = rows[r], cols[c]
            lidar.unmatched_dets.remove(lt)
            lt.status = MATCHED
            lidar.matched.append(lt)
            camera.unmatched_dets.remove(ct)
            ct.status = MATCHED
            camera.matched.append(ct)
            _link(lt, ct, lidar, camera)

    _expire(lidar.unmatched_dets, lidar, camera, cfg)
    _expire(camera.unmatched_dets, camera, lidar, cfg)


def _bridge_candidates(state: StreamState, calib: Calibration, cfg: TrackerConfig):
    rows, row_boxes = [], []
    for tr in sorted(state.unmatched_trajs, key=lambda t: t.track_id):
        if tr.hits < cfg.theta_hits:
            continue
        box = tr.image_box(calib)
        if box is not None:
            rows.append(tr)
            row_boxes.append(box)
    return rows, row_boxes


def _corrector_candidates(state: StreamState, other: StreamState, calib: Calibration, cfg: TrackerConfig):
    cols, col_boxes = [], []
    for tr in sorted(state.matched, key=lambda t: t.track_id):
        if _consumed(tr, other) or tr.hits < cfg.theta_hits:
            continue
        box = tr.image_box(calib)
        if box is not None:
            cols.append(tr)
            col_boxes.append(box)
    return cols, col_boxes


def bridge_single_gaps(
    lidar: StreamState,
    camera: StreamState,
    calib: Calibration,
    cfg: TrackerConfig,
    lidar_gaps: bool = True,
    camera_gaps: bool = True,
) -> None:
    """Bridge a detection gap in one stream using the other stream's tracked
    evidence.  Both sides of a bridge must have a ``theta_hits`` observation
    streak; the bridged track keeps its own prediction as this frame's state.
    LiDAR gaps are handled first, then camera gaps."""
    _check_aligned(lidar, camera)

    if lidar_gaps:
        rows, row_boxes = _bridge_candidates(lidar, calib, cfg)
        cols, col_boxes = _corrector_candidates(camera, lidar, calib, cfg)
        for r, c, _ in greedy_match_iou(row_boxes, col_boxes, cfg.theta_iou).matches:
            lt, ct = rows[r], cols[c]
            lidar.unmatched_trajs.remove(lt)
            _commit_correction(lt)
            lidar.matched.append(lt)
            _link(lt, ct, lidar, camera)

    if camera_gaps:
        rows, row_boxes = _bridge_candidates(camera, calib, cfg)
        cols, col_boxes = _corrector_candidates(lidar, camera, calib, cfg)
        for r, c, _ in greedy_match_iou(row_boxes, col_boxes, cfg.theta_iou).matches:
            ct, lt = rows[r], cols[c]
            camera.unmatched_trajs.remove(ct)
            _commit_correction(ct)
            camera.matched.append(ct)
            _link(lt, ct, lidar, camera)


def bridge_dual_gaps(
    lidar: StreamState,
    camera: StreamState,
    calib: Calibration,
    cfg: TrackerConfig,
    enabled: bool = True,
) -> None:
    """Bridge simultaneous gaps in both streams by matching the two streams'
    predictions against each other.  Tracks predicted to sit at the image
    boundary are excluded: an object there has likely left the scene, and
    bridging it would hallucinate a track.  Afterwards, trajectories that
    stayed unobserved and uncorrected too long are discarded."""
    _check_aligned(lidar, camera)

    if enabled:
        rows, row_boxes = [], []
        crows, crow_boxes = _bridge_candidates(camera, calib, cfg)
        for tr, box in zip(crows, crow_boxes):
            if not at_image_boundary(box, calib, cfg.boundary_margin):
                rows.append(tr)
                row_boxes.append(box)
        cols, col_boxes = [], []
        lrows, lrow_boxes = _bridge_candidates(lidar, calib, cfg)
        for tr, box in zip(lrows, lrow_boxes):
            if not at_image_boundary(box, calib, cfg.boundary_margin):
                cols.append(tr)
                col_boxes.append(box)
        for r, c, _ in greedy_match_iou(row_boxes, col_boxes, cfg.theta_iou).matches:
            ct, lt = rows[r], cols[c]
            camera.unmatched_trajs.remove(ct)
            _commit_correction(ct)
            camera.matched.append(ct)
            lidar.unmatched_trajs.remove(lt)
            _commit_correction(lt)
            lidar.matched.append(lt)
            _link(lt, ct, lidar, camera)

    _expire(lidar.unmatched_trajs, lidar, camera, cfg)
    _expire(camera.unmatched_trajs, camera, lidar, cfg)


def select_output(
    lidar: StreamState,
    camera: Optional[StreamState],
    calib: Calibration,
    cfg: TrackerConfig,
    frame: int,
    lidar_only: bool = False,
) -> OutputFrame:
    """Emit the frame's confirmed LiDAR tracks.  In dual-stream mode a track
    is emitted only if it overlaps some camera-side track (confirmed, new,
    or currently unobserved) one-to-one in the image plane."""
    candidates = []
    cand_boxes = []
    for tr in sorted(lidar.matched, key=lambda t: t.track_id):
        if tr.hits < cfg.min_output_hits:
            continue
        box2d = tr.image_box(calib)
        if box2d is None:
            continue
        candidates.append(tr)
        cand_boxes.append(box2d)

    keep: List[int] = []
    if lidar_only:
        keep = list(range(len(candidates)))
    elif candidates and camera is not None:
        cam_boxes = []
        for ct in sorted(camera.all_tracks(), key=lambda t: t.track_id):
            box = ct.image_box(calib)
            if box is not None:
                cam_boxes.append(box)
        asg = greedy_match_iou(cand_boxes, cam_boxes, cfg.theta_iou)
        keep = sorted(r for r, _, _ in asg.matches)

    entries = []
    for i in keep:
        tr = candidates[i]
        box3d = tr.current_box()
        if box3d is None:
            continue
        entries.append(
            OutputEntry(
                track_id=tr.track_id,
                box3d=box3d,
                box2d=cand_boxes[i],
                score=tr.last_detection.score,
                label=tr.last_detection.label,
            )
        )
    entries.sort(key=lambda e: e.track_id)
    return OutputFrame(frame, tuple(entries))


def _close_frame(state: StreamState) -> None:
    # A gap that stayed unbridged through the whole frame breaks the
    # consecutive-observation streak.
    for tr in state.unmatched_trajs:
        tr.hits = 0


def track_sequence(
    camera_dets: Optional[Sequence[Sequence[Detection]]],
    lidar_dets: Sequence[Sequence[Detection]],
    calib: Calibration,
    provider_camera: Optional[SimilarityProvider] = None,
    provider_lidar: Optional[SimilarityProvider] = None,
    cfg: Optional[TrackerConfig] = None,
    cases: Optional[CaseMask] = None,
) -> List[OutputFrame]:
    """Run the full pipeline over a sequence of per-frame detection lists.

    ``camera_dets`` and ``lidar_dets`` are indexed by frame, starting at 0;
    empty frames are empty lists.  With ``cases.lidar_only`` the camera
    input is ignored entirely and every confirmed LiDAR track is emitted.
    """
    cfg = cfg if cfg is not None else default_config()
    cases = cases if cases is not None else CaseMask()
    if calib is None:
        raise CalibrationMissing("track_sequence needs a calibration")
    provider_camera = provider_camera if provider_camera is not None else ZeroSimilarity()
    provider_lidar = provider_lidar if provider_lidar is not None else ZeroSimilarity()

    n_frames = len(lidar_dets)
    dual = not cases.lidar_only
    if dual:
        if camera_dets is None:
            raise ValueError("dual-stream tracking needs camera detections")
        if len(camera_dets) != n_frames:
            raise FrameOrderViolation(
                f"stream lengths differ: camera {len(camera_dets)}, lidar {n_frames}"
            )

    lidar = StreamState(LIDAR)
    camera = StreamState(CAMERA) if dual else None
    outputs: List[OutputFrame] = []
    for f in range(n_frames):
        stream_step(lidar, list(lidar_dets[f]), provider_lidar, cfg)
        if dual:
            stream_step(camera, list(camera_dets[f]), provider_camera, cfg)
            prematch_confirmed(lidar, camera, calib, cfg)
            promote_new_tracks(
                lidar, camera, calib, cfg,
                confirmed=cases.promote_confirmed,
                paired=cases.promote_paired,
            )
            bridge_single_gaps(
                lidar, camera, calib, cfg,
                lidar_gaps=cases.bridge_lidar,
                camera_gaps=cases.bridge_camera,
            )
            bridge_dual_gaps(lidar, camera, calib, cfg, enabled=cases.bridge_dual)
        else:
            expire_tracks(lidar, None, cfg)
        outputs.append(select_output(lidar, camera, calib, cfg, f, lidar_only=not dual))
        _close_frame(lidar)
        if dual:
            _close_frame(camera)
    return outputs
