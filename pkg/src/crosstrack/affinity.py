"""Association cost construction: similarity term plus geometric distances.

The similarity term comes from a pluggable provider (a stand-in for any
learned pairwise scorer); the geometric term is 1 - IoU for camera tracks
and centroid distance for LiDAR tracks.  ``total_cost`` fuses the two and
gates out pairs that fail both thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import BBox2D, BBox3D, CAMERA, LIDAR, Detection, TrackerConfig
from .geometry import iou_matrix


class DimensionMismatch(ValueError):
    """Inputs disagree in shape or box kind for the requested stream."""


class MissingEmbedding(ValueError):
    """A detection needed by the cosine provider carries no embedding."""


@dataclass
class ScoreMatrix:
    """A dense matrix with the row/column identities it was built over."""

    values: np.ndarray
    row_ids: List
    col_ids: List

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch(f"expected a 2D matrix, got shape {self.values.shape}")
        if self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise DimensionMismatch(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.row_ids)} rows / {len(self.col_ids)} cols"
            )


class SimilarityProvider:
    """Deterministic pairwise consistency scorer; scores lie in [0, 1]."""

    kind = "base"

    def score(self, prior: Detection, det: Detection) -> float:
        raise NotImplementedError


class OracleSimilarity(SimilarityProvider):
    """Scores from ground-truth identity: 1.0 for the same object, else 0.0.

    ``det_to_gt`` maps detection ids to ground-truth object ids; detections
    absent from the map (false detections) never score 1.
    """

    kind = "oracle"

    def __init__(self, det_to_gt: Mapping[str, int]):
        self._det_to_gt = dict(det_to_gt)

    def score(self, prior: Detection, det: Detection) -> float:
        a = self._det_to_gt.get(prior.det_id)
        b = self._det_to_gt.get(det.det_id)
        if a is None or b is None:
            return 0.0
        return 1.0 if a == b else 0.0


class FileScores(SimilarityProvider):
    """Scores read from a precomputed table keyed by
    (frame, stream, prior det id, det id); missing pairs score 0.0."""

    kind = "file_scores"

    def __init__(self, table: Mapping[Tuple[int, str, str, str], float]):
        self._table = dict(table)

    @classmethod
    def from_path(cls, path) -> "FileScores":
        """Parse ``frame stream prior_id det_id score`` lines."""
        table: Dict[Tuple[int, str, str, str], float] = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 5:
                    raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
                frame, stream, prior_id, det_id, score = parts
                value = float(score)
                if not (0.0 <= value <= 1.0):
                    raise ValueError(f"{path}:{lineno}: score {value} outside [0, 1]")
                table[(int(frame), stream, prior_id, det_id)] = value
        return cls(table)

    def score(self, prior: Detection, det: Detection) -> float:
        return self._table.get((det.frame, det.stream, prior.det_id, det.det_id), 0.0)


class EmbeddingCosine(SimilarityProvider):
    """Cosine similarity between detection embeddings, mapped to [0, 1]."""

    kind = "embedding_cosine"

    def score(self, prior: Detection, det: Detection) -> float:
        if prior.embedding is None or det.embedding is None:
            raise MissingEmbedding(
                f"cosine provider needs embeddings on both detections "
                f"({prior.det_id!r}, {det.det_id!r})"
            )
        a = np.asarray(prior.embedding)
        b = np.asarray(det.embedding)
        if a.shape != b.shape:
            raise DimensionMismatch(f"embedding sizes differ: {a.shape} vs {b.shape}")
        na = np.linalg.norm(a)
        nb = np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.5
        cos = float(np.dot(a, b) / (na * nb))
        cos = max(-1.0, min(1.0, cos))
        return 0.5 * (cos + 1.0)


class ZeroSimilarity(SimilarityProvider):
    """Always 0: association falls back to the geometric gate alone."""

    kind = "zero"

    def score(self, prior: Detection, det: Detection) -> float:
        return 0.0


def load_embeddings(path) -> Dict[str, Tuple[float, ...]]:
    """Parse ``frame det_id dim v1 .. v_dim`` lines into det_id -> vector."""
    out: Dict[str, Tuple[float, ...]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"{path}:{lineno}: expected at least 3 fields")
            dim = int(parts[2])
            if len(parts) != 3 + dim:
                raise ValueError(
                    f"{path}:{lineno}: declared {dim} values, found {len(parts) - 3}"
                )
            out[parts[1]] = tuple(float(v) for v in parts[3:])
    return out


def similarity_matrix(
    provider: SimilarityProvider,
    priors: Sequence[Detection],
    dets: Sequence[Detection],
    row_ids: Optional[Sequence] = None,
) -> ScoreMatrix:
    """Provider scores for every (prior representative, detection) pair."""
    values = np.zeros((len(priors), len(dets)))
    for i, prior in enumerate(priors):
        for j, det in enumerate(dets):
            s = provider.score(prior, det)
            if not np.isfinite(s) or not (0.0 <= s <= 1.0):
                raise ValueError(f"provider {provider.kind} returned invalid score {s}")
            values[i, j] = s
    rows = list(row_ids) if row_ids is not None else list(range(len(priors)))
    return ScoreMatrix(values, rows, [d.det_id for d in dets])


def geometric_cost_matrix(
    prior_boxes: Sequence,
    dets: Sequence[Detection],
    stream: str,
    row_ids: Optional[Sequence] = None,
) -> ScoreMatrix:
    """Geometric distance between predicted boxes and detections.

    Camera: 1 - IoU of image boxes, in [0, 1].  LiDAR: Euclidean centroid
    distance in meters, unbounded above.
    """
    rows = list(row_ids) if row_ids is not None else list(range(len(prior_boxes)))
    col_ids = [d.det_id for d in dets]
    if stream == CAMERA:
        for b in prior_boxes:
            if not isinstance(b, BBox2D):
                raise DimensionMismatch(f"camera stream expects 2D boxes, got {type(b).__name__}")
        det_boxes = []
        for d in dets:
            if d.box2d is None:
                raise DimensionMismatch(f"camera detection {d.det_id!r} lacks a 2D box")
            det_boxes.append(d.box2d)
        values = 1.0 - iou_matrix(list(prior_boxes), det_boxes)
        return ScoreMatrix(values, rows, col_ids)
    if stream != LIDAR:
        raise DimensionMismatch(f"unknown stream {stream!r}")
    for b in prior_boxes:
        if not isinstance(b, BBox3D):
            raise DimensionMismatch(f"lidar stream expects 3D boxes, got {type(b).__name__}")
    centers = []
    for d in dets:
        if d.box3d is None:
            raise DimensionMismatch(f"lidar detection {d.det_id!r} lacks a 3D box")
        centers.append(d.box3d.centroid)
    if not prior_boxes or not dets:
        return ScoreMatrix(np.zeros((len(prior_boxes), len(dets))), rows, col_ids)
    pc = np.array([b.centroid for b in prior_boxes])[:, None, :]
    dc = np.array(centers)[None, :, :]
    values = np.sqrt(np.sum((pc - dc) ** 2, axis=2))
    return ScoreMatrix(values, rows, col_ids)


def total_cost(
    similarity: ScoreMatrix,
    geometric: ScoreMatrix,
    cfg: TrackerConfig,
    stream: str,
) -> ScoreMatrix:
    """Fused association cost: (1 - similarity) + normalized geometric term.

    A pair is admissible when similarity >= theta_s or the raw geometric
    distance is within the stream's gate; inadmissible pairs get the sentinel.
    The geometric term is already in [0, 1] for camera and is scaled by the
    3D gate (clamped to 1) for LiDAR, so finite costs lie in [0, 2].
    """
    if similarity.values.shape != geometric.values.shape:
        raise DimensionMismatch(
            f"similarity {similarity.values.shape} vs geometric {geometric.values.shape}"
        )
    s = similarity.values
    g = geometric.values
    if stream == CAMERA:
        gate = cfg.theta_g_2d
        g_norm = g
    elif stream == LIDAR:
        gate = cfg.theta_g_3d
        g_norm = np.minimum(g / cfg.theta_g_3d, 1.0)
    else:
        raise DimensionMismatch(f"unknown stream {stream!r}")
    admissible = (s >= cfg.theta_s) | (g <= gate)
    values = np.where(admissible, (1.0 - s) + g_norm, cfg.sentinel)
    return ScoreMatrix(values, list(similarity.row_ids), list(similarity.col_ids))
