"""Model manifests: the sidecar JSON that tells the runtime what a model
file cannot.

A model file carries the graph and weights but not the input size it was
exported for, the pixel normalization it expects, how its raw output is
laid out, or what its classes are called.  A manifest stored alongside
the file as ``<file>.manifest.json`` declares all of that, which is what
makes third-party models pluggable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .boxes import DEFAULT_CONFIDENCE, DEFAULT_NMS_IOU
from .errors import ValidationError

COMBINED_GRID = "combined_grid"
TRIPLET = "triplet"

CHANNELS_FIRST = "channels_first"  # (batch, 4+classes, anchors)
CHANNELS_LAST = "channels_last"    # (batch, anchors, 4+classes)

COORDS_PIXELS = "pixels"          # model-input pixel space
COORDS_NORMALIZED = "normalized"  # [0,1] relative to model input size


@dataclass(frozen=True)
class DecodeSpec:
    """How raw output tensors become boxes.

    ``combined_grid``: one tensor of (cx, cy, w, h, per-class scores)
    rows, the usual single-stage export.  ``triplet``: three named
    tensors (corner boxes, scores, integer labels), the usual two-stage
    export.
    """

    variant: str
    # combined_grid
    output: Optional[str] = None
    layout: str = CHANNELS_FIRST
    # triplet
    boxes: Optional[str] = None
    scores: Optional[str] = None
    labels: Optional[str] = None
    coords: str = COORDS_PIXELS

    def __post_init__(self):
        if self.variant not in (COMBINED_GRID, TRIPLET):
            raise ValidationError(f"unknown decode variant '{self.variant}'")
        if self.variant == COMBINED_GRID and self.layout not in (CHANNELS_FIRST, CHANNELS_LAST):
            raise ValidationError(f"unknown combined_grid layout '{self.layout}'")
        if self.variant == TRIPLET:
            if not (self.boxes and self.scores and self.labels):
                raise ValidationError("triplet decode needs boxes/scores/labels output names")
            if self.coords not in (COORDS_PIXELS, COORDS_NORMALIZED):
                raise ValidationError(f"unknown coordinate space '{self.coords}'")

    def to_json(self) -> dict[str, Any]:
        if self.variant == COMBINED_GRID:
            out: dict[str, Any] = {"variant": self.variant, "layout": self.layout}
            if self.output:
                out["output"] = self.output
            return out
        return {
            "variant": self.variant,
            "boxes": self.boxes,
            "scores": self.scores,
            "labels": self.labels,
            "coords": self.coords,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "DecodeSpec":
        if not isinstance(obj, dict) or "variant" not in obj:
            raise ValidationError("decode spec must be an object with a 'variant'")
        return cls(
            variant=obj["variant"],
            output=obj.get("output"),
            layout=obj.get("layout", CHANNELS_FIRST),
            boxes=obj.get("boxes"),
            scores=obj.get("scores"),
            labels=obj.get("labels"),
            coords=obj.get("coords", COORDS_PIXELS),
        )


@dataclass(frozen=True)
class ModelManifest:
    model_id: str
    file_path: Path
    display_name: str
    input_width: int
    input_height: int
    decode: DecodeSpec
    class_names: tuple[str, ...] = ("chromosome",)
    channel_order: str = "rgb"
    mean: tuple[float, ...] = (0.0, 0.0, 0.0)
    scale: tuple[float, ...] = (1 / 255.0, 1 / 255.0, 1 / 255.0)
    default_confidence: float = DEFAULT_CONFIDENCE
    default_nms_iou: float = DEFAULT_NMS_IOU

    def __post_init__(self):
        if not self.model_id:
            raise ValidationError("model_id must be non-empty")
        if self.input_width <= 0 or self.input_height <= 0:
            raise ValidationError("input size must be positive")
        if not self.class_names:
            raise ValidationError("class_names must be non-empty")
        if self.channel_order not in ("rgb", "bgr"):
            raise ValidationError(f"channel_order must be rgb or bgr, got '{self.channel_order}'")
        if len(self.mean) != 3 or len(self.scale) != 3:
            raise ValidationError("mean and scale must have 3 entries")
        if not 0.0 <= self.default_confidence <= 1.0:
            raise ValidationError("defaults.confidence outside [0, 1]")
        if not 0.0 <= self.default_nms_iou <= 1.0:
            raise ValidationError("defaults.nms_iou outside [0, 1]")

    def to_json(self, file_path: Optional[str] = None) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "display_name": self.display_name,
            "file": file_path if file_path is not None else str(self.file_path),
            "input": {
                "width": self.input_width,
                "height": self.input_height,
                "channel_order": self.channel_order,
                "mean": list(self.mean),
                "scale": list(self.scale),
            },
            "decode": self.decode.to_json(),
            "class_names": list(self.class_names),
            "defaults": {
                "confidence": self.default_confidence,
                "nms_iou": self.default_nms_iou,
            },
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any], base_dir: Optional[Path] = None) -> "ModelManifest":
        """Build from the manifest JSON document.

        ``file`` paths are resolved relative to ``base_dir`` (usually the
        directory the manifest was read from).
        """
        if not isinstance(obj, dict):
            raise ValidationError("manifest must be a JSON object")
        for key in ("model_id", "file", "decode"):
            if key not in obj:
                raise ValidationError(f"manifest is missing '{key}'")
        inp = obj.get("input", {})
        if "width" not in inp or "height" not in inp:
            raise ValidationError("manifest input must declare width and height")
        file_path = Path(obj["file"])
        if base_dir is not None and not file_path.is_absolute():
            file_path = base_dir / file_path
        defaults = obj.get("defaults", {})
        try:
            return cls(
                model_id=str(obj["model_id"]),
                file_path=file_path,
                display_name=str(obj.get("display_name", obj["model_id"])),
                input_width=int(inp["width"]),
                input_height=int(inp["height"]),
                decode=DecodeSpec.from_json(obj["decode"]),
                class_names=tuple(obj.get("class_names") or ("chromosome",)),
                channel_order=str(inp.get("channel_order", "rgb")),
                mean=tuple(float(v) for v in inp.get("mean", (0.0, 0.0, 0.0))),
                scale=tuple(float(v) for v in inp.get("scale", (1 / 255.0,) * 3)),
                default_confidence=float(defaults.get("confidence", DEFAULT_CONFIDENCE)),
                default_nms_iou=float(defaults.get("nms_iou", DEFAULT_NMS_IOU)),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"manifest field has wrong type: {exc}") from exc


def load_manifest(path) -> ModelManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {path} is not valid JSON: {exc}") from exc
    return ModelManifest.from_json(obj, base_dir=path.parent)


def manifest_path_for(model_file) -> Path:
    """Conventional sidecar location: ``<file>.manifest.json``."""
    p = Path(model_file)
    return p.with_name(p.name + ".manifest.json")
