"""Model registry: registration with signature validation, activation
with hot-swap, and the full inference pipeline.

Sessions are constructed lazily on first use.  When the active model is
swapped, the outgoing session is kept while inferences are still inside
it and released once idle, so switching never double-loads memory or
interrupts an in-flight request.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .boxes import Detection, filter_by_confidence, nms
from .decode import decode_output
from .engine import create_session
from .errors import (
    DuplicateModelIdError,
    ModelFileNotFoundError,
    SignatureMismatchError,
    UnknownModelIdError,
)
from .manifest import COMBINED_GRID, CHANNELS_FIRST, TRIPLET, ModelManifest
from .onnx_wire import TensorInfo, load_model
from .preprocess import ImageSource, load_image, preprocess


@dataclass(frozen=True)
class ModelDescriptor:
    """A registered model: manifest plus the validated graph signature."""

    manifest: ModelManifest
    inputs: tuple[TensorInfo, ...]
    outputs: tuple[TensorInfo, ...]

    @property
    def model_id(self) -> str:
        return self.manifest.model_id

    def to_json(self, active: bool = False) -> dict[str, Any]:
        # no filesystem paths: API payloads stay relocatable and private
        doc = self.manifest.to_json()
        doc.pop("file")
        doc["active"] = active
        doc["outputs"] = [
            {"name": t.name, "shape": [d if isinstance(d, int) else None for d in t.shape]}
            for t in self.outputs
        ]
        return doc


@dataclass(frozen=True)
class LatencyBreakdown:
    preprocess_ms: float
    forward_ms: float
    postprocess_ms: float

    @property
    def total_ms(self) -> float:
        return self.preprocess_ms + self.forward_ms + self.postprocess_ms

    def to_json(self) -> dict[str, float]:
        return {
            "preprocess_ms": round(self.preprocess_ms, 3),
            "forward_ms": round(self.forward_ms, 3),
            "postprocess_ms": round(self.postprocess_ms, 3),
            "total_ms": round(self.total_ms, 3),
        }


@dataclass(frozen=True)
class InferenceResult:
    model_id: str
    detections: tuple[Detection, ...]
    latency: LatencyBreakdown
    image_width: int
    image_height: int

    def to_json(self, class_names: Optional[Sequence[str]] = None) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "image": {"width": self.image_width, "height": self.image_height},
            "detections": [d.to_json(class_names) for d in self.detections],
            "latency_ms": self.latency.to_json(),
        }


@dataclass
class _SessionSlot:
    session: Any = None
    in_flight: int = 0
    release_when_idle: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


def _validate_signature(manifest: ModelManifest, outputs: Sequence[TensorInfo]) -> None:
    by_name = {t.name: t for t in outputs}
    spec = manifest.decode
    if spec.variant == COMBINED_GRID:
        if spec.output:
            if spec.output not in by_name:
                raise SignatureMismatchError(
                    f"declared output '{spec.output}' not in graph outputs {sorted(by_name)}"
                )
            target = by_name[spec.output]
        elif len(outputs) == 1:
            target = outputs[0]
        else:
            raise SignatureMismatchError(
                f"combined_grid needs a named output; graph has {sorted(by_name)}"
            )
        shape = target.shape
        if len(shape) not in (2, 3):
            raise SignatureMismatchError(
                f"combined_grid output '{target.name}' has rank {len(shape)}, expected 2 or 3"
            )
        ch_axis = (1 if spec.layout == CHANNELS_FIRST else len(shape) - 1)
        if len(shape) == 2:
            ch_axis = 0 if spec.layout == CHANNELS_FIRST else 1
        ch = shape[ch_axis]
        expected = 4 + len(manifest.class_names)
        if isinstance(ch, int) and ch != expected:
            raise SignatureMismatchError(
                f"output '{target.name}' carries {ch} channels, "
                f"but 4 + {len(manifest.class_names)} classes = {expected}"
            )
    elif spec.variant == TRIPLET:
        for name in (spec.boxes, spec.scores, spec.labels):
            if name not in by_name:
                raise SignatureMismatchError(
                    f"declared output '{name}' not in graph outputs {sorted(by_name)}"
                )
        box_shape = by_name[spec.boxes].shape
        if box_shape:
            last = box_shape[-1]
            if isinstance(last, int) and last != 4:
                raise SignatureMismatchError(
                    f"boxes output '{spec.boxes}' has last dim {last}, expected 4"
                )


class ModelRegistry:
    """Thread-safe registry; mutations serialize behind one lock."""

    def __init__(self, session_factory: Callable[[Any], Any] = create_session):
        self._session_factory = session_factory
        self._lock = threading.RLock()
        self._models: dict[str, ModelDescriptor] = {}
        self._slots: dict[str, _SessionSlot] = {}
        self._active_id: Optional[str] = None

    # -- registration ------------------------------------------------------

    def register(self, manifest: ModelManifest) -> ModelDescriptor:
        path = manifest.file_path
        if not path.exists():
            raise ModelFileNotFoundError(f"model file not found: {path}")
        model = load_model(path)  # raises InvalidModelFileError
        init_names = set(model.graph.initializers)
        inputs = tuple(t for t in model.graph.inputs if t.name not in init_names)
        outputs = tuple(model.graph.outputs)
        _validate_signature(manifest, outputs)
        descriptor = ModelDescriptor(manifest=manifest, inputs=inputs, outputs=outputs)
        with self._lock:
            if manifest.model_id in self._models:
                raise DuplicateModelIdError(f"model_id '{manifest.model_id}' already registered")
            self._models[manifest.model_id] = descriptor
            self._slots[manifest.model_id] = _SessionSlot()
        return descriptor

    def activate(self, model_id: str) -> ModelDescriptor:
        with self._lock:
            if model_id not in self._models:
                raise UnknownModelIdError(f"unknown model_id '{model_id}'")
            previous = self._active_id
            self._active_id = model_id
            if previous and previous != model_id:
                slot = self._slots[previous]
                if slot.in_flight == 0:
                    slot.session = None
                else:
                    slot.release_when_idle = True
            return self._models[model_id]

    def get(self, model_id: str) -> ModelDescriptor:
        with self._lock:
            if model_id not in self._models:
                raise UnknownModelIdError(f"unknown model_id '{model_id}'")
            return self._models[model_id]

    def list_models(self) -> list[dict[str, Any]]:
        with self._lock:
            return [
                d.to_json(active=(mid == self._active_id))
                for mid, d in sorted(self._models.items())
            ]

    @property
    def active_id(self) -> Optional[str]:
        with self._lock:
            return self._active_id

    def model_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._models)

    def has_session(self, model_id: str) -> bool:
        with self._lock:
            slot = self._slots.get(model_id)
            return bool(slot and slot.session is not None)

    # -- inference ---------------------------------------------------------

    def _checkout(self, model_id: str):
        with self._lock:
            descriptor = self._models.get(model_id)
            if descriptor is None:
                raise UnknownModelIdError(f"unknown model_id '{model_id}'")
            slot = self._slots[model_id]
            slot.in_flight += 1
        try:
            with slot.lock:
                if slot.session is None:
                    slot.session = self._session_factory(descriptor.manifest.file_path)
        except Exception:
            with self._lock:
                slot.in_flight -= 1
            raise
        return descriptor, slot

    def _checkin(self, model_id: str, slot: _SessionSlot) -> None:
        with self._lock:
            slot.in_flight -= 1
            if (
                slot.release_when_idle
                and slot.in_flight == 0
                and self._active_id != model_id
            ):
                slot.session = None
                slot.release_when_idle = False

    def run_inference(
        self,
        image: ImageSource,
        model_id: Optional[str] = None,
        confidence: Optional[float] = None,
        nms_iou: Optional[float] = None,
    ) -> InferenceResult:
        if model_id is None:
            model_id = self.active_id
            if model_id is None:
                raise UnknownModelIdError("no model_id given and no model is active")
        descriptor, slot = self._checkout(model_id)
        try:
            manifest = descriptor.manifest
            conf = manifest.default_confidence if confidence is None else min(max(confidence, 0.0), 1.0)
            iou_thr = manifest.default_nms_iou if nms_iou is None else min(max(nms_iou, 0.0), 1.0)

            t0 = time.perf_counter()
            pil = load_image(image)
            tensor, transform = preprocess(pil, manifest)
            t1 = time.perf_counter()

            feeds = {}
            if descriptor.inputs:
                feeds[descriptor.inputs[0].name] = tensor.astype(
                    descriptor.inputs[0].dtype, copy=False
                )
            with slot.lock:
                raw = slot.session.run(feeds)
            t2 = time.perf_counter()

            dets = decode_output(raw, manifest.decode, transform)
            dets = filter_by_confidence(dets, conf)
            dets = nms(dets, iou_thr, per_class=True)
            t3 = time.perf_counter()

            return InferenceResult(
                model_id=model_id,
                detections=tuple(dets),
                latency=LatencyBreakdown(
                    preprocess_ms=(t1 - t0) * 1e3,
                    forward_ms=(t2 - t1) * 1e3,
                    postprocess_ms=(t3 - t2) * 1e3,
                ),
                image_width=transform.original_width,
                image_height=transform.original_height,
            )
        finally:
            self._checkin(model_id, slot)
