#!/usr/bin/env python3
"""Build a self-contained demo project and run a benchmark on it.

Creates synthetic metaphase-like images with known ground truth,
registers the bundled fixture models, splits the dataset, benchmarks,
and prints the ranking table.  Useful as a smoke test and as a seed
project for the UI:

    python3 scripts/demo_project.py /tmp/demo
    ayc serve --project /tmp/demo
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ayc.annotations import AnnBox, AnnotationSet
from ayc.bench import format_ranking_table, run_benchmark
from ayc.boxes import BBox
from ayc.evaluation import ingest_training_log
from ayc.manifest import load_manifest
from ayc.project import Project

ASSETS = Path(__file__).resolve().parent.parent / "tests" / "assets"

IMAGE_W, IMAGE_H = 512, 384


def synth_image(rng: np.ndarray, boxes: list[BBox]) -> Image.Image:
    """Gray background with dark blobs where the ground truth says."""
    base = rng.integers(195, 225, size=(IMAGE_H, IMAGE_W), dtype=np.uint8)
    img = Image.fromarray(base, mode="L").convert("RGB")
    draw = ImageDraw.Draw(img)
    for b in boxes:
        draw.ellipse(
            (b.x_min + 2, b.y_min + 2, b.x_max - 2, b.y_max - 2),
            fill=(70, 60, 80),
        )
    return img


def main() -> None:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-project")
    rng = np.random.default_rng(2026)
    project = Project(root)

    sets = []
    for k in range(12):
        image_id = f"slide{k:03d}"
        boxes = []
        for j in range(int(rng.integers(4, 9))):
            w = float(rng.uniform(18, 42))
            h = float(rng.uniform(18, 42))
            x = float(rng.uniform(0, IMAGE_W - w))
            y = float(rng.uniform(0, IMAGE_H - h))
            boxes.append(BBox(round(x), round(y), round(x + w), round(y + h)))
        synth_image(rng, boxes).save(project.images_dir / f"{image_id}.png")
        sets.append(AnnotationSet(
            image_id=image_id,
            boxes=tuple(
                AnnBox(box_id=f"b0000-{i}", bbox=b, class_id=0)
                for i, b in enumerate(boxes)
            ),
            width=IMAGE_W, height=IMAGE_H,
        ))

    project.scan_images()
    project.store.install_sets(sets, overwrite=True)
    project.make_split(seed=7)

    for name in ("fixture-grid", "fixture-triplet"):
        if name not in project.registry.model_ids():
            project.register_model(load_manifest(ASSETS / f"{name}.onnx.manifest.json"))
    project.activate_model("fixture-grid")

    # fake training logs so the dashboard has loss curves to draw
    for model_id, offset in (("fixture-grid", 0.0), ("fixture-triplet", 0.15)):
        rows = ["epoch,split,loss"]
        for epoch in range(1, 31):
            rows.append(f"{epoch},train,{1.2 * np.exp(-epoch / 9) + offset + 0.05:.4f}")
            rows.append(f"{epoch},val,{1.3 * np.exp(-epoch / 11) + offset + 0.08:.4f}")
        project.save_loss_series(ingest_training_log("\n".join(rows), model_id))

    payload = run_benchmark(project, ["fixture-grid", "fixture-triplet"], part="test")
    print(format_ranking_table(payload))
    print(f"\nproject ready at {root.resolve()}")


if __name__ == "__main__":
    main()
