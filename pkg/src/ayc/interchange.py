"""COCO JSON and YOLO text interchange for annotation sets.

COCO is the canonical rich format (carries image dims and class names);
YOLO text is import/export only because its lines carry neither.  Export
collapses provenance: downstream trainers see plain boxes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .annotations import AnnBox, AnnotationSet, PROVENANCE_HUMAN
from .boxes import BBox
from .errors import (
    DimsMissingError,
    InconsistentDimsError,
    ParseError,
    UnknownClassError,
)

YOLO_DECIMALS = 6  # printed precision bounds the round-trip accuracy


def _require_dims(aset: AnnotationSet) -> tuple[int, int]:
    if aset.width is None or aset.height is None:
        raise DimsMissingError(f"image dims unknown for '{aset.image_id}'")
    return aset.width, aset.height


def _check_class(class_id: int, class_names: Sequence[str], where: str) -> None:
    if not 0 <= class_id < len(class_names):
        raise UnknownClassError(f"class {class_id} in {where} outside class list")


def export_coco(
    sets: Sequence[AnnotationSet],
    class_names: Sequence[str],
    file_names: Optional[Mapping[str, str]] = None,
) -> dict[str, Any]:
    """Standard COCO detection JSON; boxes become [x, y, w, h]."""
    images = []
    annotations = []
    ann_id = 1
    for idx, aset in enumerate(sorted(sets, key=lambda s: s.image_id), start=1):
        width, height = _require_dims(aset)
        file_name = (file_names or {}).get(aset.image_id, f"{aset.image_id}.png")
        images.append({
            "id": idx,
            "file_name": file_name,
            "width": width,
            "height": height,
        })
        for box in aset.boxes:
            _check_class(box.class_id, class_names, f"'{aset.image_id}'")
            b = box.bbox
            annotations.append({
                "id": ann_id,
                "image_id": idx,
                "category_id": box.class_id + 1,
                "bbox": [b.x_min, b.y_min, b.width, b.height],
                "area": b.area,
                "iscrowd": 0,
            })
            ann_id += 1
    categories = [
        {"id": i + 1, "name": name} for i, name in enumerate(class_names)
    ]
    return {"images": images, "annotations": annotations, "categories": categories}


def import_coco(payload: Any) -> tuple[list[AnnotationSet], list[str]]:
    """Parse COCO JSON into revision-0 sets (provenance human)."""
    if isinstance(payload, (str, bytes)):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError("COCO payload must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if key not in payload or not isinstance(payload[key], list):
            raise ParseError(f"COCO payload missing '{key}' array")

    categories = payload["categories"]
    class_names = []
    cat_index: dict[Any, int] = {}
    for i, cat in enumerate(categories):
        try:
            cat_index[cat["id"]] = i
            class_names.append(str(cat["name"]))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed category entry: {exc}") from exc

    images: dict[Any, dict[str, Any]] = {}
    for entry in payload["images"]:
        try:
            image_id = Path(str(entry.get("file_name", entry["id"]))).stem
            images[entry["id"]] = {
                "image_id": image_id,
                "width": int(entry["width"]),
                "height": int(entry["height"]),
                "boxes": [],
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed image entry: {exc}") from exc

    counters: dict[Any, int] = {}
    for ann in payload["annotations"]:
        try:
            image_key = ann["image_id"]
            if image_key not in images:
                raise ParseError(f"annotation references unknown image {image_key}")
            if ann["category_id"] not in cat_index:
                raise ParseError(f"annotation references unknown category {ann['category_id']}")
            x, y, w, h = (float(v) for v in ann["bbox"])
            if w < 0 or h < 0:
                raise ParseError(f"negative box size in annotation {ann.get('id')}")
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed annotation entry: {exc}") from exc
        k = counters.get(image_key, 0)
        counters[image_key] = k + 1
        images[image_key]["boxes"].append(AnnBox(
            box_id=f"b0000-{k}",
            bbox=BBox(x, y, x + w, y + h),
            class_id=cat_index[ann["category_id"]],
            provenance=PROVENANCE_HUMAN,
        ))

    sets = [
        AnnotationSet(
            image_id=info["image_id"],
            boxes=tuple(info["boxes"]),
            revision=0,
            width=info["width"],
            height=info["height"],
        )
        for info in images.values()
    ]
    sets.sort(key=lambda s: s.image_id)
    return sets, class_names


def export_yolo(
    sets: Sequence[AnnotationSet],
    class_names: Sequence[str],
) -> dict[str, str]:
    """One text payload per image: ``class cx cy w h`` normalized to [0,1]."""
    out: dict[str, str] = {}
    for aset in sets:
        width, height = _require_dims(aset)
        lines = []
        for box in aset.boxes:
            _check_class(box.class_id, class_names, f"'{aset.image_id}'")
            b = box.bbox
            cx = (b.x_min + b.x_max) / 2.0 / width
            cy = (b.y_min + b.y_max) / 2.0 / height
            w = b.width / width
            h = b.height / height
            lines.append(
                f"{box.class_id} {cx:.{YOLO_DECIMALS}f} {cy:.{YOLO_DECIMALS}f} "
                f"{w:.{YOLO_DECIMALS}f} {h:.{YOLO_DECIMALS}f}"
            )
        out[aset.image_id] = "\n".join(lines) + ("\n" if lines else "")
    return out


def import_yolo(
    payloads: Mapping[str, str],
    image_dims: Mapping[str, tuple[int, int]],
) -> list[AnnotationSet]:
    """Parse YOLO text payloads; ``image_dims`` supplies the pixel frame
    the normalized lines are relative to."""
    sets = []
    for image_id in sorted(payloads):
        if image_id not in image_dims:
            raise InconsistentDimsError(f"no image dims supplied for '{image_id}'")
        width, height = image_dims[image_id]
        if width <= 0 or height <= 0:
            raise InconsistentDimsError(f"bad dims {width}x{height} for '{image_id}'")
        boxes = []
        for line_no, line in enumerate(payloads[image_id].splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ParseError(
                    f"'{image_id}' line {line_no}: expected 5 fields, got {len(parts)}"
                )
            try:
                class_id = int(parts[0])
                cx, cy, w, h = (float(p) for p in parts[1:])
            except ValueError as exc:
                raise ParseError(f"'{image_id}' line {line_no}: {exc}") from exc
            if class_id < 0:
                raise ParseError(f"'{image_id}' line {line_no}: negative class id")
            if w < 0 or h < 0:
                raise ParseError(f"'{image_id}' line {line_no}: negative box size")
            x_min = (cx - w / 2.0) * width
            y_min = (cy - h / 2.0) * height
            boxes.append(AnnBox(
                box_id=f"b0000-{len(boxes)}",
                bbox=BBox(x_min, y_min, x_min + w * width, y_min + h * height),
                class_id=class_id,
                provenance=PROVENANCE_HUMAN,
            ))
        sets.append(AnnotationSet(
            image_id=image_id,
            boxes=tuple(boxes),
            revision=0,
            width=width,
            height=height,
        ))
    return sets
