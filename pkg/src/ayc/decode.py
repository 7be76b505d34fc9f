"""Raw model output -> Detections in original-image coordinates."""

from __future__ import annotations

import numpy as np

from .boxes import BBox, Detection
from .errors import ShapeMismatchError
from .manifest import (
    CHANNELS_FIRST,
    COMBINED_GRID,
    COORDS_NORMALIZED,
    TRIPLET,
    DecodeSpec,
)
from .preprocess import PreprocessTransform


def _squeeze_batch(arr: np.ndarray, want_rank: int, name: str) -> np.ndarray:
    if arr.ndim == want_rank + 1:
        if arr.shape[0] != 1:
            raise ShapeMismatchError(f"'{name}' has batch {arr.shape[0]}, expected 1")
        arr = arr[0]
    if arr.ndim != want_rank:
        raise ShapeMismatchError(f"'{name}' has shape {arr.shape}, expected rank {want_rank}")
    return arr


def _combined_grid_arrays(outputs: dict[str, np.ndarray], spec: DecodeSpec):
    if spec.output:
        if spec.output not in outputs:
            raise ShapeMismatchError(f"output '{spec.output}' not produced by model")
        raw = outputs[spec.output]
    elif len(outputs) == 1:
        raw = next(iter(outputs.values()))
    else:
        raise ShapeMismatchError(
            f"model has outputs {sorted(outputs)}; combined_grid needs one named"
        )
    grid = _squeeze_batch(np.asarray(raw, dtype=np.float64), 2, spec.output or "output")
    if spec.layout == CHANNELS_FIRST:
        grid = grid.T  # -> (anchors, 4 + classes)
    if grid.shape[1] < 5:
        raise ShapeMismatchError(
            f"combined_grid rows have {grid.shape[1]} channels, need at least 5"
        )
    cx, cy, w, h = grid[:, 0], grid[:, 1], grid[:, 2], grid[:, 3]
    scores = grid[:, 4:]
    class_ids = np.argmax(scores, axis=1)
    confs = scores[np.arange(len(scores)), class_ids]
    x1, y1 = cx - w / 2.0, cy - h / 2.0
    x2, y2 = cx + w / 2.0, cy + h / 2.0
    return np.stack([x1, y1, x2, y2], axis=1), class_ids, confs


def _triplet_arrays(outputs: dict[str, np.ndarray], spec: DecodeSpec,
                    transform: PreprocessTransform):
    for name in (spec.boxes, spec.scores, spec.labels):
        if name not in outputs:
            raise ShapeMismatchError(f"output '{name}' not produced by model")
    boxes = _squeeze_batch(np.asarray(outputs[spec.boxes], dtype=np.float64), 2, spec.boxes)
    scores = _squeeze_batch(np.asarray(outputs[spec.scores], dtype=np.float64), 1, spec.scores)
    labels = _squeeze_batch(np.asarray(outputs[spec.labels]), 1, spec.labels)
    if boxes.shape[1] != 4:
        raise ShapeMismatchError(f"'{spec.boxes}' has shape {boxes.shape}, expected (N, 4)")
    if not (len(boxes) == len(scores) == len(labels)):
        raise ShapeMismatchError(
            f"triplet lengths disagree: {len(boxes)} boxes, "
            f"{len(scores)} scores, {len(labels)} labels"
        )
    boxes = boxes.copy()
    if spec.coords == COORDS_NORMALIZED:
        boxes[:, [0, 2]] *= transform.input_width
        boxes[:, [1, 3]] *= transform.input_height
    return boxes, labels.astype(np.int64), scores


def decode_output(
    outputs: dict[str, np.ndarray],
    spec: DecodeSpec,
    transform: PreprocessTransform,
    confidence_threshold: float = 0.0,
) -> list[Detection]:
    """Decode, map through the inverse letterbox, clamp to image bounds.

    ``confidence_threshold`` drops rows early; 0.0 keeps everything,
    which is exactly filter_by_confidence applied afterwards.
    """
    if spec.variant == COMBINED_GRID:
        boxes, class_ids, confs = _combined_grid_arrays(outputs, spec)
    elif spec.variant == TRIPLET:
        boxes, class_ids, confs = _triplet_arrays(outputs, spec, transform)
    else:  # unreachable for validated specs
        raise ShapeMismatchError(f"unknown decode variant '{spec.variant}'")

    keep = confs >= confidence_threshold
    boxes, class_ids, confs = boxes[keep], class_ids[keep], confs[keep]

    # inverse letterbox, then clamp into the source image
    boxes[:, [0, 2]] = (boxes[:, [0, 2]] - transform.pad_left) / transform.scale
    boxes[:, [1, 3]] = (boxes[:, [1, 3]] - transform.pad_top) / transform.scale
    boxes[:, [0, 2]] = np.clip(boxes[:, [0, 2]], 0.0, transform.original_width)
    boxes[:, [1, 3]] = np.clip(boxes[:, [1, 3]], 0.0, transform.original_height)

    dets = []
    for (x1, y1, x2, y2), cls, conf in zip(boxes, class_ids, confs):
        dets.append(Detection(
            bbox=BBox(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2)),
            class_id=int(cls),
            confidence=float(np.clip(conf, 0.0, 1.0)),
        ))
    return dets
