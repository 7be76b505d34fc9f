import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

TESTS_DIR = Path(__file__).resolve().parent
ASSETS = TESTS_DIR / "assets"
sys.path.insert(0, str(TESTS_DIR))  # make oracles.py importable


@pytest.fixture(scope="session")
def assets_dir() -> Path:
    return ASSETS


@pytest.fixture(scope="session")
def grid_manifest_path() -> Path:
    return ASSETS / "fixture-grid.onnx.manifest.json"


@pytest.fixture(scope="session")
def triplet_manifest_path() -> Path:
    return ASSETS / "fixture-triplet.onnx.manifest.json"


def make_image(width: int, height: int, seed: int = 0) -> Image.Image:
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return Image.fromarray(arr, mode="RGB")


@pytest.fixture()
def small_image() -> Image.Image:
    return make_image(64, 64, seed=1)


@pytest.fixture()
def metaphase_sized_image() -> Image.Image:
    # matches the lab's capture resolution
    return make_image(2048, 1536, seed=2)


def build_project(
    root,
    n_images: int = 6,
    image_w: int = 96,
    image_h: int = 96,
    boxes_per_image: int = 3,
    with_models: bool = True,
    with_split: bool = True,
    seed: int = 0,
):
    """Small fully-populated project: images, annotations, fixture models.

    Ground-truth boxes are laid out on a grid so they never overlap each
    other (NMS on a perfect replay keeps them all).
    """
    from ayc.annotations import AnnotationSet, AnnBox
    from ayc.boxes import BBox
    from ayc.manifest import load_manifest
    from ayc.project import Project

    project = Project(root)
    sets = []
    for k in range(n_images):
        image_id = f"img{k:03d}"
        make_image(image_w, image_h, seed=seed + k).save(
            project.images_dir / f"{image_id}.png"
        )
        boxes = []
        for j in range(boxes_per_image):
            x0 = 4 + (j % 3) * (image_w // 3)
            y0 = 4 + (j // 3) * (image_h // 3)
            boxes.append(AnnBox(
                box_id=f"b0000-{j}",
                bbox=BBox(x0, y0, x0 + image_w // 4, y0 + image_h // 4),
                class_id=0,
            ))
        sets.append(AnnotationSet(
            image_id=image_id, boxes=tuple(boxes), revision=0,
            width=image_w, height=image_h,
        ))
    project.scan_images()
    project.store.install_sets(sets)
    if with_split:
        project.make_split(seed=7)
    if with_models:
        project.register_model(load_manifest(ASSETS / "fixture-grid.onnx.manifest.json"))
        project.register_model(load_manifest(ASSETS / "fixture-triplet.onnx.manifest.json"))
        project.activate_model("fixture-grid")
    return project


def oracle_infer(project):
    """Inference stub replaying stored ground truth at full confidence."""
    from ayc.boxes import Detection

    def infer(model_id, record):
        aset = project.store.get_set(record.image_id)
        dets = [Detection(b.bbox, b.class_id, 1.0) for b in aset.boxes]
        return dets, 1.0
    return infer


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One visible pass/fail line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and report.when in ("call", None):
                name = nodeid.split("::")[-1]
                lines.append((name, status.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"[{status:>7}] {name}")
