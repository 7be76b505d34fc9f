"""Box geometry and score-space primitives: IoU, confidence filtering, NMS.

Coordinates are continuous pixels (no +1 area convention), so these
primitives agree with COCO-style tooling and with the annotation
converters.  Everything here is a pure function over immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

# Operating point used when a manifest or request does not override it.
# Conventional single-stage detector defaults; the evaluated models never
# state one.
DEFAULT_CONFIDENCE = 0.25
DEFAULT_NMS_IOU = 0.45


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, corner coordinates in pixel space."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(
                f"degenerate box: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_json(self) -> dict[str, float]:
        return {
            "x_min": float(self.x_min),
            "y_min": float(self.y_min),
            "x_max": float(self.x_max),
            "y_max": float(self.y_max),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "BBox":
        return cls(
            float(obj["x_min"]), float(obj["y_min"]),
            float(obj["x_max"]), float(obj["y_max"]),
        )


@dataclass(frozen=True)
class Detection:
    """One detected object: box, class index, and model confidence."""

    bbox: BBox
    class_id: int
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.class_id < 0:
            raise ValueError(f"negative class_id {self.class_id}")

    def to_json(self, class_names: Sequence[str] | None = None) -> dict[str, Any]:
        out: dict[str, Any] = {
            "bbox": self.bbox.to_json(),
            "class_id": int(self.class_id),
            "confidence": float(self.confidence),
        }
        if class_names is not None and 0 <= self.class_id < len(class_names):
            out["class_name"] = class_names[self.class_id]
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Detection":
        return cls(
            bbox=BBox.from_json(obj["bbox"]),
            class_id=int(obj["class_id"]),
            confidence=float(obj["confidence"]),
        )


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0.0 when the union has zero area."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def filter_by_confidence(dets: Iterable[Detection], threshold: float) -> list[Detection]:
    """Detections with confidence >= threshold, input order preserved."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    return [d for d in dets if d.confidence >= threshold]


def _nms_order(dets: Sequence[Detection]) -> np.ndarray:
    """Deterministic processing order: confidence desc, class_id asc, input order."""
    confs = np.array([d.confidence for d in dets], dtype=np.float64)
    classes = np.array([d.class_id for d in dets], dtype=np.int64)
    idx = np.arange(len(dets))
    # lexsort: last key is primary
    return np.lexsort((idx, classes, -confs))


def nms(dets: Sequence[Detection], iou_threshold: float, per_class: bool = True) -> list[Detection]:
    """Greedy non-maximum suppression.

    A box is kept iff its IoU with every already-kept box (same class only
    when ``per_class``) is strictly below ``iou_threshold``.  Output is
    sorted by confidence descending with ties broken by smaller class_id,
    then input order (the same order suppression ran in), so results are
    reproducible.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside [0, 1]")
    if not dets:
        return []

    order = _nms_order(dets)
    x1 = np.array([d.bbox.x_min for d in dets], dtype=np.float64)[order]
    y1 = np.array([d.bbox.y_min for d in dets], dtype=np.float64)[order]
    x2 = np.array([d.bbox.x_max for d in dets], dtype=np.float64)[order]
    y2 = np.array([d.bbox.y_max for d in dets], dtype=np.float64)[order]
    cls = np.array([d.class_id for d in dets], dtype=np.int64)[order]
    areas = (x2 - x1) * (y2 - y1)

    n = len(dets)
    alive = np.ones(n, dtype=bool)
    kept: list[int] = []
    for i in range(n):
        if not alive[i]:
            continue
        kept.append(i)
        rest = np.arange(i + 1, n)
        rest = rest[alive[i + 1:]]
        if rest.size == 0:
            continue
        ix = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        iy = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
        union = areas[i] + areas[rest] - inter
        with np.errstate(divide="ignore", invalid="ignore"):
            overlap = np.where(union > 0.0, inter / union, 0.0)
        suppress = overlap >= iou_threshold
        if per_class:
            suppress &= cls[rest] == cls[i]
        alive[rest[suppress]] = False

    return [dets[order[i]] for i in kept]
