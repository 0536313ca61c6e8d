"""CLEAR-style multi-object tracking metrics.

The evaluator is an explicit fold over frames in ascending order.  Within a
frame, correspondences carried over from the previous frame are kept while
they still overlap, and the remaining pairs are matched greedily by
descending IoU.  An identity switch is counted when a ground-truth object
is matched to a hypothesis id different from the last one it ever had; a
fragmentation is counted each time an object's coverage resumes after a gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

from .core import BBox2D
from .geometry import iou_matrix


class FrameMismatch(ValueError):
    """Hypothesis frames fall outside the ground-truth frame range."""


@dataclass(frozen=True)
class ClearReport:
    mota: float
    fp: int
    fn: int
    idsw: int
    frag: int
    mt: int
    ml: int
    recall: float
    precision: float
    tp: int
    total_gt: int
    n_gt_tracks: int


FrameBoxes = Mapping[int, Sequence[Tuple[object, BBox2D]]]


def clear_mot(gt_frames: FrameBoxes, hyp_frames: FrameBoxes, iou_thr: float = 0.5) -> ClearReport:
    """Score tracking hypotheses against ground truth in the image plane.

    Both inputs map frame index -> [(track id, BBox2D), ...]; frames with no
    boxes may be present as empty lists or absent entirely.  Hypothesis
    frames must lie inside the ground-truth frame range.
    """
    if not (0.0 < iou_thr <= 1.0):
        raise ValueError(f"iou_thr must lie in (0, 1], got {iou_thr}")
    gt_frame_ids = [f for f, boxes in gt_frames.items() if boxes]
    hyp_frame_ids = [f for f, boxes in hyp_frames.items() if boxes]
    if hyp_frame_ids:
        if not gt_frame_ids:
            raise FrameMismatch("hypotheses given but the ground truth is empty")
        if min(hyp_frame_ids) < min(gt_frame_ids) or max(hyp_frame_ids) > max(gt_frame_ids):
            raise FrameMismatch(
                f"hypothesis frames [{min(hyp_frame_ids)}, {max(hyp_frame_ids)}] exceed "
                f"ground-truth range [{min(gt_frame_ids)}, {max(gt_frame_ids)}]"
            )

    frames = sorted(set(gt_frames) | set(hyp_frames))
    tp = fp = fn = idsw = 0
    total_gt = 0
    prev_match: Dict[object, object] = {}
    last_hyp: Dict[object, object] = {}
    coverage: Dict[object, List[bool]] = {}

    for f in frames:
        gts = list(gt_frames.get(f, ()))
        hyps = list(hyp_frames.get(f, ()))
        total_gt += len(gts)
        gt_ids = [g for g, _ in gts]
        hyp_ids = [h for h, _ in hyps]
        iou = iou_matrix([b for _, b in gts], [b for _, b in hyps])

        matches: Dict[int, int] = {}
        used_h = set()
        # Keep last frame's correspondences while they still overlap.
        hyp_index = {h: j for j, h in enumerate(hyp_ids)}
        for i, g in enumerate(gt_ids):
            h = prev_match.get(g)
            if h is None or h not in hyp_index:
                continue
            j = hyp_index[h]
            if iou[i, j] >= iou_thr:
                matches[i] = j
                used_h.add(j)
        # Match the rest greedily by descending overlap.
        candidates = [
            (-iou[i, j], i, j)
            for i in range(len(gt_ids))
            if i not in matches
            for j in range(len(hyp_ids))
            if j not in used_h and iou[i, j] >= iou_thr
        ]
        for _, i, j in sorted(candidates):
            if i in matches or j in used_h:
                continue
            matches[i] = j
            used_h.add(j)

        prev_match = {}
        for i, j in matches.items():
            g, h = gt_ids[i], hyp_ids[j]
            if g in last_hyp and last_hyp[g] != h:
                idsw += 1
            last_hyp[g] = h
            prev_match[g] = h
        tp += len(matches)
        fn += len(gts) - len(matches)
        fp += len(hyps) - len(matches)
        for i, g in enumerate(gt_ids):
            coverage.setdefault(g, []).append(i in matches)

    frag = 0
    mt = ml = 0
    for g, covered in coverage.items():
        seen = False
        in_gap = False
        for c in covered:
            if c:
                if seen and in_gap:
                    frag += 1
                seen = True
                in_gap = False
            elif seen:
                in_gap = True
        ratio = sum(covered) / len(covered)
        if ratio >= 0.8:
            mt += 1
        if ratio <= 0.2:
            ml += 1

    mota = 1.0 - (fp + fn + idsw) / total_gt if total_gt else 1.0
    recall = tp / total_gt if total_gt else 1.0
    precision = tp / (tp + fp) if (tp + fp) else 1.0
    return ClearReport(
        mota=mota, fp=fp, fn=fn, idsw=idsw, frag=frag, mt=mt, ml=ml,
        recall=recall, precision=precision, tp=tp, total_gt=total_gt,
        n_gt_tracks=len(coverage),
    )


def frames_from_outputs(outputs) -> Dict[int, List[Tuple[int, BBox2D]]]:
    """Adapt tracker output frames to the evaluator's input shape."""
    return {of.frame: [(e.track_id, e.box2d) for e in of.entries] for of in outputs}


def aggregate_reports(reports: List[ClearReport]) -> ClearReport:
    """Pool per-sequence reports: error counts add, ratios recompute from
    the pooled totals."""
    if not reports:
        raise ValueError("nothing to aggregate")
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    idsw = sum(r.idsw for r in reports)
    frag = sum(r.frag for r in reports)
    total_gt = sum(r.total_gt for r in reports)
    mota = 1.0 - (fp + fn + idsw) / total_gt if total_gt else 1.0
    recall = tp / total_gt if total_gt else 1.0
    precision = tp / (tp + fp) if tp + fp else 1.0
    return ClearReport(
        mota=mota, fp=fp, fn=fn, idsw=idsw, frag=frag,
        mt=sum(r.mt for r in reports), ml=sum(r.ml for r in reports),
        recall=recall, precision=precision, tp=tp, total_gt=total_gt,
        n_gt_tracks=sum(r.n_gt_tracks for r in reports),
    )


def report_text(report: ClearReport) -> str:
    lines = [
        f"MOTA      {report.mota:8.4f}",
        f"recall    {report.recall:8.4f}",
        f"precision {report.precision:8.4f}",
        f"TP        {report.tp:8d}",
        f"FP        {report.fp:8d}",
        f"FN        {report.fn:8d}",
        f"IDSW      {report.idsw:8d}",
        f"FRAG      {report.frag:8d}",
        f"MT        {report.mt:8d} / {report.n_gt_tracks}",
        f"ML        {report.ml:8d} / {report.n_gt_tracks}",
        f"GT boxes  {report.total_gt:8d}",
    ]
    return "\n".join(lines)


def report_kv(report: ClearReport) -> str:
    pairs = [
        ("mota", f"{report.mota:.6f}"),
        ("recall", f"{report.recall:.6f}"),
        ("precision", f"{report.precision:.6f}"),
        ("tp", str(report.tp)),
        ("fp", str(report.fp)),
        ("fn", str(report.fn)),
        ("idsw", str(report.idsw)),
        ("frag", str(report.frag)),
        ("mt", str(report.mt)),
        ("ml", str(report.ml)),
        ("total_gt", str(report.total_gt)),
        ("n_gt_tracks", str(report.n_gt_tracks)),
    ]
    return "\n".join(f"{k} {v}" for k, v in pairs)
