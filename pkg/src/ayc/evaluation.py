"""Detection evaluation: IoU matching, average precision, model ranking,
and training-log ingestion for the dashboard's loss charts.

Matching is greedy per image and per class; flags are then pooled across
images per class for AP.  AP uses all-point interpolation (the precision
envelope), which is exactly computable and what modern evaluators report.
Classes without any ground truth are excluded from the mean.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from .boxes import BBox, Detection, iou
from .errors import (
    EmptyInputError,
    MalformedLogError,
    NonMonotoneEpochsError,
    UnknownClassIdError,
)


@dataclass(frozen=True)
class GroundTruth:
    """A reference annotation for evaluation: box + class."""

    bbox: BBox
    class_id: int


@dataclass(frozen=True)
class MatchFlag:
    """One detection's fate, with the keys that order it deterministically."""

    confidence: float
    image_id: str
    index: int  # position among same-class detections of that image
    class_id: int
    is_tp: bool

    @property
    def sort_key(self):
        return (-self.confidence, self.image_id, self.index)


@dataclass(frozen=True)
class ClassMatches:
    flags: tuple[MatchFlag, ...]
    gt_count: int

    @property
    def tp(self) -> int:
        return sum(1 for f in self.flags if f.is_tp)

    @property
    def fp(self) -> int:
        return len(self.flags) - self.tp

    @property
    def fn(self) -> int:
        return self.gt_count - self.tp


@dataclass(frozen=True)
class MatchResult:
    flags: tuple[MatchFlag, ...]  # all classes pooled, confidence-descending
    fn_count: int
    per_class: dict[int, ClassMatches]

    @property
    def tp_count(self) -> int:
        return sum(1 for f in self.flags if f.is_tp)

    @property
    def fp_count(self) -> int:
        return len(self.flags) - self.tp_count


DetsByImage = Mapping[str, Sequence[Detection]]
GtsByImage = Mapping[str, Sequence[GroundTruth]]


def match_detections(
    dets_by_image: DetsByImage,
    gts_by_image: GtsByImage,
    iou_threshold: float,
) -> MatchResult:
    """Greedy per-image, per-class matching.

    Detections are processed in confidence-descending order (input order
    breaks ties); each takes the unmatched ground truth with the highest
    IoU >= threshold, lower ground-truth index on ties.  One ground truth
    matches at most one detection.
    """
    class_ids = set()
    for dets in dets_by_image.values():
        class_ids.update(d.class_id for d in dets)
    for gts in gts_by_image.values():
        class_ids.update(g.class_id for g in gts)

    per_class: dict[int, ClassMatches] = {}
    total_fn = 0
    for c in sorted(class_ids):
        flags: list[MatchFlag] = []
        gt_count = 0
        for image_id in sorted(set(dets_by_image) | set(gts_by_image)):
            dets = [d for d in dets_by_image.get(image_id, ()) if d.class_id == c]
            gts = [g for g in gts_by_image.get(image_id, ()) if g.class_id == c]
            gt_count += len(gts)
            matched = [False] * len(gts)
            order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
            for i in order:
                best_j = -1
                best_iou = -1.0
                for j, g in enumerate(gts):
                    if matched[j]:
                        continue
                    v = iou(dets[i].bbox, g.bbox)
                    if v >= iou_threshold and v > best_iou:
                        best_iou = v
                        best_j = j
                if best_j >= 0:
                    matched[best_j] = True
                flags.append(MatchFlag(
                    confidence=dets[i].confidence,
                    image_id=image_id,
                    index=i,
                    class_id=c,
                    is_tp=best_j >= 0,
                ))
            total_fn += matched.count(False)
        flags.sort(key=lambda f: f.sort_key)
        per_class[c] = ClassMatches(flags=tuple(flags), gt_count=gt_count)

    pooled = sorted(
        (f for cm in per_class.values() for f in cm.flags),
        key=lambda f: f.sort_key,
    )
    return MatchResult(flags=tuple(pooled), fn_count=total_fn, per_class=per_class)


def average_precision(flags: Sequence[bool], total_gt: int) -> float:
    """All-point-interpolated AP for a confidence-ordered TP/FP sequence."""
    if total_gt < 0:
        raise ValueError("total_gt must be >= 0")
    if total_gt == 0 or len(flags) == 0:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    ranks = np.arange(1, len(flags) + 1, dtype=np.float64)
    precision = tp / ranks
    recall = tp / float(total_gt)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * envelope))


def _pr_points(flags: Sequence[MatchFlag], total_gt: int) -> list[tuple[float, float]]:
    points = []
    tp = 0
    for k, f in enumerate(flags, start=1):
        tp += 1 if f.is_tp else 0
        recall = tp / total_gt if total_gt else 0.0
        points.append((recall, tp / k))
    return points


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p50_ms: float
    p95_ms: float

    @classmethod
    def from_samples(cls, samples_ms: Sequence[float]) -> "LatencyStats":
        arr = np.asarray(samples_ms, dtype=np.float64)
        return cls(
            mean_ms=float(arr.mean()),
            p50_ms=float(np.percentile(arr, 50)),
            p95_ms=float(np.percentile(arr, 95)),
        )

    def to_json(self) -> dict[str, float]:
        return {
            "mean_ms": round(self.mean_ms, 3),
            "p50_ms": round(self.p50_ms, 3),
            "p95_ms": round(self.p95_ms, 3),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "LatencyStats":
        return cls(obj["mean_ms"], obj["p50_ms"], obj["p95_ms"])


@dataclass(frozen=True)
class EvalReport:
    model_id: str
    per_class_ap: dict[str, float]  # keyed by class name
    map_at_50: float
    tp: int
    fp: int
    fn: int
    pr_points: tuple[tuple[float, float], ...]
    iou_threshold: float = 0.5
    latency: Optional[LatencyStats] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "iou_threshold": self.iou_threshold,
            "per_class_ap": dict(self.per_class_ap),
            "map_at_50": self.map_at_50,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "pr_points": [[r, p] for r, p in self.pr_points],
            "latency": self.latency.to_json() if self.latency else None,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "EvalReport":
        return cls(
            model_id=obj["model_id"],
            per_class_ap={str(k): float(v) for k, v in obj["per_class_ap"].items()},
            map_at_50=float(obj["map_at_50"]),
            tp=int(obj["tp"]),
            fp=int(obj["fp"]),
            fn=int(obj["fn"]),
            pr_points=tuple((float(r), float(p)) for r, p in obj["pr_points"]),
            iou_threshold=float(obj.get("iou_threshold", 0.5)),
            latency=LatencyStats.from_json(obj["latency"]) if obj.get("latency") else None,
        )

    def with_latency(self, latency: LatencyStats) -> "EvalReport":
        return EvalReport(
            model_id=self.model_id, per_class_ap=self.per_class_ap,
            map_at_50=self.map_at_50, tp=self.tp, fp=self.fp, fn=self.fn,
            pr_points=self.pr_points, iou_threshold=self.iou_threshold,
            latency=latency,
        )


def map_at_iou(
    dets_by_image: DetsByImage,
    gts_by_image: GtsByImage,
    iou_threshold: float = 0.5,
    class_names: Sequence[str] = ("chromosome",),
    model_id: str = "",
) -> EvalReport:
    """Pool matches across images per class, average AP over classes
    that have ground truth."""
    n_classes = len(class_names)
    for image_id, dets in dets_by_image.items():
        for d in dets:
            if not 0 <= d.class_id < n_classes:
                raise UnknownClassIdError(
                    f"detection class {d.class_id} in '{image_id}' outside class list"
                )
    for image_id, gts in gts_by_image.items():
        for g in gts:
            if not 0 <= g.class_id < n_classes:
                raise UnknownClassIdError(
                    f"ground-truth class {g.class_id} in '{image_id}' outside class list"
                )

    result = match_detections(dets_by_image, gts_by_image, iou_threshold)
    per_class_ap: dict[str, float] = {}
    aps = []
    total_gt = 0
    for c, cm in result.per_class.items():
        total_gt += cm.gt_count
        if cm.gt_count == 0:
            continue  # no 0/0: classes without ground truth stay out of the mean
        ap = average_precision([f.is_tp for f in cm.flags], cm.gt_count)
        per_class_ap[class_names[c]] = ap
        aps.append(ap)

    return EvalReport(
        model_id=model_id,
        per_class_ap=per_class_ap,
        map_at_50=float(sum(aps) / len(aps)) if aps else 0.0,
        tp=result.tp_count,
        fp=result.fp_count,
        fn=result.fn_count,
        pr_points=tuple(_pr_points(result.flags, total_gt)),
        iou_threshold=iou_threshold,
    )


@dataclass(frozen=True)
class RankedModel:
    rank: int
    model_id: str
    map_at_50: float
    delta_vs_best: float
    report: EvalReport

    def to_json(self) -> dict[str, Any]:
        return {
            "rank": self.rank,
            "model_id": self.model_id,
            "map_at_50": self.map_at_50,
            "delta_vs_best": self.delta_vs_best,
            "report": self.report.to_json(),
        }


def compare_models(reports: Sequence[EvalReport]) -> list[RankedModel]:
    """Rank by mAP@50 descending, ties by model_id; deltas vs the best."""
    if not reports:
        raise EmptyInputError("no reports to compare")
    ordered = sorted(reports, key=lambda r: (-r.map_at_50, r.model_id))
    best = ordered[0].map_at_50
    return [
        RankedModel(
            rank=i + 1,
            model_id=r.model_id,
            map_at_50=r.map_at_50,
            delta_vs_best=r.map_at_50 - best,
            report=r,
        )
        for i, r in enumerate(ordered)
    ]


@dataclass(frozen=True)
class LossPoint:
    epoch: int
    split: str  # train | val
    loss: float


@dataclass(frozen=True)
class LossSeries:
    model_id: str
    points: tuple[LossPoint, ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "points": [
                {"epoch": p.epoch, "split": p.split, "loss": p.loss}
                for p in self.points
            ],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "LossSeries":
        return cls(
            model_id=obj["model_id"],
            points=tuple(
                LossPoint(int(p["epoch"]), str(p["split"]), float(p["loss"]))
                for p in obj["points"]
            ),
        )


_SPLITS = ("train", "val")


def ingest_training_log(source: Union[str, Path, io.TextIOBase], model_id: str) -> LossSeries:
    """Parse a training-log CSV (columns epoch,split,loss; extras ignored).

    The workbench charts losses, it never computes them: logs come from
    whatever trained the model.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source  # CSV content; pass a Path to read a file
    else:
        text = source.read()

    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = {"epoch", "split", "loss"} - set(h.strip() for h in header)
    if missing:
        raise MalformedLogError(f"log header missing columns: {sorted(missing)}")

    points: list[LossPoint] = []
    last_epoch: dict[str, int] = {}
    for line_no, row in enumerate(reader, start=2):
        try:
            epoch = int(str(row["epoch"]).strip())
            split = str(row["split"]).strip()
            loss = float(str(row["loss"]).strip())
        except (TypeError, ValueError) as exc:
            raise MalformedLogError(f"line {line_no}: non-numeric field: {exc}") from exc
        if split not in _SPLITS:
            raise MalformedLogError(f"line {line_no}: split must be train or val, got '{split}'")
        if loss < 0:
            raise MalformedLogError(f"line {line_no}: negative loss {loss}")
        if split in last_epoch and epoch <= last_epoch[split]:
            raise NonMonotoneEpochsError(
                f"line {line_no}: epoch {epoch} not increasing for split '{split}'"
            )
        last_epoch[split] = epoch
        points.append(LossPoint(epoch=epoch, split=split, loss=loss))
    return LossSeries(model_id=model_id, points=tuple(points))
