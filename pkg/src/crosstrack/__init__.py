"""Camera-LiDAR track fusion: a LiDAR tracker that borrows the camera's
evidence to confirm births and carry tracks across detection gaps, plus the
simulator and CLEAR-style evaluator used to exercise it."""

__version__ = "0.1.0"

from .core import (
    BBox2D,
    BBox3D,
    CAMERA,
    Calibration,
    Detection,
    LIDAR,
    STREAMS,
    TrackerConfig,
    default_config,
)
from .geometry import (
    AllBehindCamera,
    DegenerateProjection,
    ProjectionError,
    at_image_boundary,
    box_corners_3d,
    centroid_distance_3d,
    iou_2d,
    iou_matrix,
    project_box_3d,
)
from .motion import (
    KF2DState,
    KF3DState,
    kf_box,
    kf_init,
    kf_predict,
    kf_update,
    wrap_angle,
)
from .affinity import (
    EmbeddingCosine,
    FileScores,
    OracleSimilarity,
    ScoreMatrix,
    SimilarityProvider,
    ZeroSimilarity,
    geometric_cost_matrix,
    load_embeddings,
    similarity_matrix,
    total_cost,
)
from .association import Assignment, greedy_match, greedy_match_iou
from .tracker import (
    CaseMask,
    OutputEntry,
    OutputFrame,
    StreamState,
    Track,
    track_sequence,
)
from .sim import (
    FaultEvent,
    FaultSpec,
    Scenario,
    default_calibration,
    generate,
    gt_frames_2d,
    oracle_provider,
    scripted_case,
)
from .metrics import (
    ClearReport,
    FrameMismatch,
    aggregate_reports,
    clear_mot,
    frames_from_outputs,
    report_text,
)

__all__ = [
    "__version__",
    "BBox2D", "BBox3D", "CAMERA", "Calibration", "Detection", "LIDAR",
    "STREAMS", "TrackerConfig", "default_config",
    "AllBehindCamera", "DegenerateProjection", "ProjectionError",
    "at_image_boundary", "box_corners_3d", "centroid_distance_3d",
    "iou_2d", "iou_matrix", "project_box_3d",
    "KF2DState", "KF3DState", "kf_box", "kf_init", "kf_predict", "kf_update",
    "wrap_angle",
    "EmbeddingCosine", "FileScores", "OracleSimilarity", "ScoreMatrix",
    "SimilarityProvider", "ZeroSimilarity", "geometric_cost_matrix",
    "load_embeddings", "similarity_matrix", "total_cost",
    "Assignment", "greedy_match", "greedy_match_iou",
    "CaseMask", "OutputEntry", "OutputFrame", "StreamState", "Track",
    "track_sequence",
    "FaultEvent", "FaultSpec", "Scenario", "default_calibration", "generate",
    "gt_frames_2d", "oracle_provider", "scripted_case",
    "ClearReport", "FrameMismatch", "aggregate_reports", "clear_mot",
    "frames_from_outputs", "report_text",
]
