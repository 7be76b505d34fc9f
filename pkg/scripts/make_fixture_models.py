#!/usr/bin/env python3
"""Generate the tiny constant-output model files used by the test suite.

Run from the repo root; writes into tests/assets/.  The models are real
ONNX-format graphs: an input the graph ignores and Constant nodes that
emit a fixed detection tensor, one per decode variant.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ayc.manifest import ModelManifest, DecodeSpec
from ayc.onnx_wire import Graph, Model, Node, save_model, tensor_info

ASSETS = Path(__file__).resolve().parent.parent / "tests" / "assets"

INPUT_SIZE = 64


def grid_model() -> Model:
    # anchors: strong box, heavy overlap (NMS fodder), low confidence (filter fodder)
    cx = [32.0, 33.0, 10.0]
    cy = [32.0, 33.0, 50.0]
    w = [16.0, 16.0, 8.0]
    h = [16.0, 16.0, 8.0]
    score = [0.9, 0.6, 0.1]
    preds = np.array([[cx, cy, w, h, score]], dtype=np.float32)  # (1, 5, 3)
    graph = Graph(
        name="fixture_grid",
        nodes=[
            Node("Constant", [], ["raw"], attrs={"value": preds}),
            Node("Identity", ["raw"], ["preds"]),
        ],
        inputs=[tensor_info("images", np.float32, (1, 3, INPUT_SIZE, INPUT_SIZE))],
        outputs=[tensor_info("preds", np.float32, (1, 5, 3))],
    )
    return Model(graph=graph)


def triplet_model() -> Model:
    boxes = np.array([[8.0, 8.0, 24.0, 24.0], [40.0, 40.0, 56.0, 56.0]], dtype=np.float32)
    scores = np.array([0.8, 0.3], dtype=np.float32)
    labels = np.array([0, 0], dtype=np.int64)
    graph = Graph(
        name="fixture_triplet",
        nodes=[
            Node("Constant", [], ["boxes"], attrs={"value": boxes}),
            Node("Constant", [], ["scores"], attrs={"value": scores}),
            Node("Constant", [], ["labels"], attrs={"value": labels}),
        ],
        inputs=[tensor_info("images", np.float32, (1, 3, INPUT_SIZE, INPUT_SIZE))],
        outputs=[
            tensor_info("boxes", np.float32, (2, 4)),
            tensor_info("scores", np.float32, (2,)),
            tensor_info("labels", np.int64, (2,)),
        ],
    )
    return Model(graph=graph)


def manifest_for(model_id: str, file_name: str, decode: DecodeSpec) -> ModelManifest:
    return ModelManifest(
        model_id=model_id,
        file_path=ASSETS / file_name,
        display_name=model_id.replace("-", " ").title(),
        input_width=INPUT_SIZE,
        input_height=INPUT_SIZE,
        decode=decode,
        class_names=("chromosome",),
    )


def main() -> None:
    ASSETS.mkdir(parents=True, exist_ok=True)

    save_model(grid_model(), ASSETS / "fixture-grid.onnx")
    grid_manifest = manifest_for(
        "fixture-grid", "fixture-grid.onnx",
        DecodeSpec(variant="combined_grid", layout="channels_first"),
    )
    (ASSETS / "fixture-grid.onnx.manifest.json").write_text(
        json.dumps(grid_manifest.to_json(file_path="fixture-grid.onnx"), indent=2) + "\n"
    )

    save_model(triplet_model(), ASSETS / "fixture-triplet.onnx")
    triplet_manifest = manifest_for(
        "fixture-triplet", "fixture-triplet.onnx",
        DecodeSpec(variant="triplet", boxes="boxes", scores="scores",
                   labels="labels", coords="pixels"),
    )
    (ASSETS / "fixture-triplet.onnx.manifest.json").write_text(
        json.dumps(triplet_manifest.to_json(file_path="fixture-triplet.onnx"), indent=2) + "\n"
    )
    print(f"wrote fixture models into {ASSETS}")


if __name__ == "__main__":
    main()
