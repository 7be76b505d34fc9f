"""ayc: a desktop-local workbench for AI-assisted chromosome detection.

Runs exported detection models on metaphase images, evaluates and ranks
them with mAP@50 against lab annotations, and serves a local review UI
for correcting bounding boxes.  Everything executes on this machine.
"""

from .boxes import BBox, Detection, filter_by_confidence, iou, nms
from .evaluation import (
    EvalReport,
    GroundTruth,
    LossSeries,
    average_precision,
    compare_models,
    ingest_training_log,
    map_at_iou,
    match_detections,
)
from .manifest import DecodeSpec, ModelManifest, load_manifest
from .registry import InferenceResult, ModelRegistry
from .project import Project

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "Detection",
    "DecodeSpec",
    "EvalReport",
    "GroundTruth",
    "InferenceResult",
    "LossSeries",
    "ModelManifest",
    "ModelRegistry",
    "Project",
    "average_precision",
    "compare_models",
    "filter_by_confidence",
    "ingest_training_log",
    "iou",
    "load_manifest",
    "map_at_iou",
    "match_detections",
    "nms",
]
