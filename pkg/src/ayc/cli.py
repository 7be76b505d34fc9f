"""Headless command-line access to every workflow.

Output is JSON by default (the same payloads the HTTP service returns);
``--format table`` prints human-readable rankings.  Module errors exit
nonzero with ``code: message`` on stderr.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import interchange
from .dataset import scan_directory
from .errors import ValidationError, WorkbenchError
from .manifest import load_manifest
from .project import Project
from .server import DEFAULT_PORT, serve as serve_service

PROJECT_OPTION = click.option(
    "--project", "project_dir", envvar="AYC_PROJECT", required=True,
    type=click.Path(path_type=Path),
    help="Project directory (or set AYC_PROJECT).",
)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except WorkbenchError as exc:
            click.echo(f"{exc.code}: {exc.message}", err=True)
            sys.exit(1)
    return wrapper


def emit(payload, out: Path | None = None) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if out is not None:
        out.write_text(text, encoding="utf-8")
    click.echo(text, nl=False)


@click.group()
def main() -> None:
    """Local workbench for AI-assisted chromosome detection."""


@main.command()
@PROJECT_OPTION
@click.option("--port", default=DEFAULT_PORT, show_default=True, type=int)
@click.option("--ui", "ui_dir", type=click.Path(path_type=Path), default=None,
              help="Directory of built UI assets to serve at /.")
@handle_errors
def serve(project_dir: Path, port: int, ui_dir: Path | None) -> None:
    """Run the localhost service (loopback only)."""
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    serve_service(project_dir, port=port, ui_dir=ui_dir)


@main.command()
@PROJECT_OPTION
@click.option("--model", "model_id", required=True)
@click.option("--image", "image_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--conf", "confidence", type=float, default=None)
@click.option("--nms-iou", "nms_iou", type=float, default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@handle_errors
def infer(project_dir: Path, model_id: str, image_path: Path,
          confidence: float | None, nms_iou: float | None, out: Path | None) -> None:
    """Run one image through a registered model."""
    project = Project(project_dir)
    result = project.registry.run_inference(
        image_path, model_id=model_id, confidence=confidence, nms_iou=nms_iou
    )
    class_names = project.registry.get(result.model_id).manifest.class_names
    emit(result.to_json(class_names=class_names), out)


@main.command()
@PROJECT_OPTION
@click.option("--models", "model_ids", required=True,
              help="Comma-separated registered model ids.")
@click.option("--part", default="test", show_default=True,
              type=click.Choice(["train", "val", "test"]))
@click.option("--iou-threshold", default=0.5, show_default=True, type=float)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--format", "fmt", default="json", show_default=True,
              type=click.Choice(["json", "table"]))
@handle_errors
def bench(project_dir: Path, model_ids: str, part: str, iou_threshold: float,
          out: Path | None, fmt: str) -> None:
    """Benchmark models on a split part and rank them."""
    project = Project(project_dir)
    ids = [m.strip() for m in model_ids.split(",") if m.strip()]
    payload = bench_mod.run_benchmark(project, ids, part=part, iou_threshold=iou_threshold)
    if out is not None:
        out.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if fmt == "table":
        click.echo(bench_mod.format_ranking_table(payload))
    else:
        click.echo(json.dumps(payload, indent=1, sort_keys=True))


@main.command()
@PROJECT_OPTION
@click.option("--seed", required=True, type=int)
@click.option("--ratios", default="0.70,0.15,0.15", show_default=True,
              help="train,val,test fractions summing to 1.")
@handle_errors
def split(project_dir: Path, seed: int, ratios: str) -> None:
    """Create the deterministic train/val/test split."""
    try:
        parts = tuple(float(r) for r in ratios.split(","))
    except ValueError as exc:
        raise ValidationError(f"cannot parse --ratios '{ratios}': {exc}") from exc
    project = Project(project_dir)
    if not project.image_records():
        project.scan_images()
    result = project.make_split(ratios=parts, seed=seed)
    emit(result.to_json())


@main.command()
@click.option("--from", "src_fmt", required=True, type=click.Choice(["yolo", "coco"]))
@click.option("--to", "dst_fmt", required=True, type=click.Choice(["yolo", "coco"]))
@click.option("--images", "images_dir", type=click.Path(path_type=Path), default=None,
              help="Image directory supplying dims for YOLO conversion.")
@click.option("--in", "src", required=True, type=click.Path(path_type=Path))
@click.option("--out", "dst", required=True, type=click.Path(path_type=Path))
@click.option("--classes", default="chromosome", show_default=True,
              help="Comma-separated class names for YOLO sources.")
@handle_errors
def convert(src_fmt: str, dst_fmt: str, images_dir: Path | None,
            src: Path, dst: Path, classes: str) -> None:
    """Convert annotations between COCO JSON and YOLO text."""
    if src_fmt == dst_fmt:
        raise ValidationError("--from and --to must differ")
    class_names = [c.strip() for c in classes.split(",") if c.strip()]

    if src_fmt == "coco":
        if not src.exists():
            raise ValidationError(f"no such file: {src}")
        sets, class_names = interchange.import_coco(src.read_text(encoding="utf-8"))
    else:
        if not src.is_dir():
            raise ValidationError(f"--in must be a directory of YOLO .txt files: {src}")
        if images_dir is None:
            raise ValidationError("YOLO input needs --images for pixel dims")
        dims = {
            r.image_id: (r.width, r.height) for r in scan_directory(images_dir)
        }
        payloads = {
            p.stem: p.read_text(encoding="utf-8") for p in sorted(src.glob("*.txt"))
        }
        sets = interchange.import_yolo(payloads, dims)

    if dst_fmt == "coco":
        doc = interchange.export_coco(sets, class_names)
        dst.parent.mkdir(parents=True, exist_ok=True)
        dst.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        click.echo(f"wrote {len(doc['annotations'])} boxes to {dst}")
    else:
        payloads = interchange.export_yolo(sets, class_names)
        dst.mkdir(parents=True, exist_ok=True)
        for image_id, text in payloads.items():
            (dst / f"{image_id}.txt").write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(payloads)} label files to {dst}")


@main.command()
@PROJECT_OPTION
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--activate", "activate_after", is_flag=True, default=False,
              help="Also make this the active model.")
@handle_errors
def register(project_dir: Path, manifest_path: Path, activate_after: bool) -> None:
    """Register a model from its manifest file."""
    project = Project(project_dir)
    manifest = load_manifest(manifest_path)
    descriptor = project.register_model(manifest)
    if activate_after:
        project.activate_model(manifest.model_id)
    emit(descriptor.to_json(active=project.registry.active_id == manifest.model_id))


if __name__ == "__main__":
    main()
