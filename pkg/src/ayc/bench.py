"""Benchmark harness: run models over a split part, evaluate against the
stored ground truth, and rank.

Per-image inference fans out over a small thread pool (sessions already
serialize safely); aggregation is single-threaded and deterministic.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Optional, Sequence

from .boxes import Detection
from .dataset import ImageRecord, pair_with_annotations
from .errors import ValidationError
from .evaluation import (
    EvalReport,
    LatencyStats,
    compare_models,
    map_at_iou,
)
from .project import Project

# infer_fn(model_id, record) -> (detections, latency_ms or None)
InferFn = Callable[[str, ImageRecord], tuple[Sequence[Detection], Optional[float]]]


def _registry_infer(project: Project) -> InferFn:
    def infer(model_id: str, record: ImageRecord):
        result = project.registry.run_inference(record.path, model_id=model_id)
        return result.detections, result.latency.total_ms
    return infer


def run_benchmark(
    project: Project,
    model_ids: Sequence[str],
    part: str = "test",
    iou_threshold: float = 0.5,
    infer_fn: Optional[InferFn] = None,
    workers: Optional[int] = None,
) -> dict[str, Any]:
    """Full pipeline: split -> inference per image -> mAP -> ranking."""
    if not model_ids:
        raise ValidationError("benchmark needs at least one model id")
    split = project.load_split()
    gts_by_part = pair_with_annotations(split, project.store)
    gts = gts_by_part[part] if part in gts_by_part else None
    if gts is None:
        raise ValidationError(f"unknown split part '{part}'")

    infer = infer_fn or _registry_infer(project)
    for model_id in model_ids:
        project.registry.get(model_id)  # raises UnknownModelIdError up front

    records = [project.image_record(image_id) for image_id in sorted(gts)]
    n_workers = workers or min(4, os.cpu_count() or 1)

    reports: list[EvalReport] = []
    for model_id in model_ids:
        dets_by_image: dict[str, Sequence[Detection]] = {}
        latencies: list[float] = []
        if records:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                results = pool.map(lambda r: (r.image_id, infer(model_id, r)), records)
                for image_id, (dets, latency_ms) in results:
                    dets_by_image[image_id] = list(dets)
                    if latency_ms is not None:
                        latencies.append(latency_ms)
        report = map_at_iou(
            dets_by_image, gts,
            iou_threshold=iou_threshold,
            class_names=project.class_names,
            model_id=model_id,
        )
        if latencies:
            report = report.with_latency(LatencyStats.from_samples(latencies))
        reports.append(report)

    ranking = compare_models(reports)
    return {
        "part": part,
        "iou_threshold": iou_threshold,
        "image_count": len(records),
        "reports": [r.to_json() for r in reports],
        "ranking": [
            {
                "rank": e.rank,
                "model_id": e.model_id,
                "map_at_50": e.map_at_50,
                "delta_vs_best": e.delta_vs_best,
            }
            for e in ranking
        ],
    }


def format_ranking_table(payload: dict[str, Any]) -> str:
    """Human-readable ranking for terminal output."""
    lines = [
        f"part={payload['part']}  images={payload['image_count']}  "
        f"iou_threshold={payload['iou_threshold']}",
        f"{'rank':>4}  {'model':<24} {'mAP@50':>8}  {'delta':>8}",
    ]
    latency_by_id = {
        r["model_id"]: r.get("latency") for r in payload.get("reports", [])
    }
    for entry in payload["ranking"]:
        latency = latency_by_id.get(entry["model_id"])
        lat = f"  p50={latency['p50_ms']:.1f}ms" if latency else ""
        lines.append(
            f"{entry['rank']:>4}  {entry['model_id']:<24} "
            f"{entry['map_at_50'] * 100:>7.2f}%  {entry['delta_vs_best'] * 100:>+7.2f}pp{lat}"
        )
    return "\n".join(lines)
