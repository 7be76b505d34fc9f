"""Ground-truth annotation sets with human-in-the-loop editing.

Edits are optimistic: each carries the revision it was computed against
and conflicts surface as errors instead of silent merges.  Every commit
appends to an audit log, and replaying that log reproduces the store
bit-for-bit, so the specialist's decision trail stays inspectable.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

from .boxes import BBox, Detection
from .errors import (
    OutOfBoundsError,
    ParseError,
    RevisionConflictError,
    UnknownBoxIdError,
    UnknownImageIdError,
    ValidationError,
)

PROVENANCE_HUMAN = "human"
PROVENANCE_SUGGESTED = "model_suggested"
PROVENANCE_ACCEPTED = "model_accepted"
_PROVENANCES = (PROVENANCE_HUMAN, PROVENANCE_SUGGESTED, PROVENANCE_ACCEPTED)


@dataclass(frozen=True)
class AnnBox:
    box_id: str
    bbox: BBox
    class_id: int
    provenance: str = PROVENANCE_HUMAN

    def to_json(self) -> dict[str, Any]:
        return {
            "box_id": self.box_id,
            "bbox": self.bbox.to_json(),
            "class_id": self.class_id,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "AnnBox":
        provenance = obj.get("provenance", PROVENANCE_HUMAN)
        if provenance not in _PROVENANCES:
            raise ParseError(f"unknown provenance '{provenance}'")
        return cls(
            box_id=str(obj["box_id"]),
            bbox=BBox.from_json(obj["bbox"]),
            class_id=int(obj["class_id"]),
            provenance=provenance,
        )


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str
    boxes: tuple[AnnBox, ...] = ()
    revision: int = 0
    width: Optional[int] = None
    height: Optional[int] = None

    def box(self, box_id: str) -> AnnBox:
        for b in self.boxes:
            if b.box_id == box_id:
                return b
        raise UnknownBoxIdError(f"box '{box_id}' not in '{self.image_id}'")

    def has_box(self, box_id: str) -> bool:
        return any(b.box_id == box_id for b in self.boxes)

    def to_json(self) -> dict[str, Any]:
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "revision": self.revision,
            "boxes": [b.to_json() for b in self.boxes],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "AnnotationSet":
        return cls(
            image_id=str(obj["image_id"]),
            boxes=tuple(AnnBox.from_json(b) for b in obj.get("boxes", [])),
            revision=int(obj.get("revision", 0)),
            width=obj.get("width"),
            height=obj.get("height"),
        )


# --- edits ------------------------------------------------------------------

@dataclass(frozen=True)
class AddBox:
    bbox: BBox
    class_id: int
    expected_revision: int
    provenance: str = PROVENANCE_HUMAN
    box_id: Optional[str] = None  # assigned at commit unless replaying


@dataclass(frozen=True)
class RemoveBox:
    box_id: str
    expected_revision: int


@dataclass(frozen=True)
class AdjustBox:
    box_id: str
    new_bbox: BBox
    expected_revision: int


@dataclass(frozen=True)
class AcceptDetections:
    detections: tuple[Detection, ...]
    expected_revision: int
    box_ids: Optional[tuple[str, ...]] = None


Edit = Union[AddBox, RemoveBox, AdjustBox, AcceptDetections]


def edit_from_json(obj: dict[str, Any]) -> Edit:
    """Parse the wire form of an edit (the PUT body and audit format)."""
    if not isinstance(obj, dict) or "op" not in obj:
        raise ParseError("edit must be an object with an 'op'")
    if "expected_revision" not in obj:
        raise ParseError("edit is missing 'expected_revision'")
    op = obj["op"]
    rev = int(obj["expected_revision"])
    try:
        if op == "add":
            provenance = obj.get("provenance", PROVENANCE_HUMAN)
            if provenance not in _PROVENANCES:
                raise ParseError(f"unknown provenance '{provenance}'")
            return AddBox(
                bbox=BBox.from_json(obj["bbox"]),
                class_id=int(obj["class_id"]),
                expected_revision=rev,
                provenance=provenance,
                box_id=obj.get("box_id"),
            )
        if op == "remove":
            return RemoveBox(box_id=str(obj["box_id"]), expected_revision=rev)
        if op == "adjust":
            return AdjustBox(
                box_id=str(obj["box_id"]),
                new_bbox=BBox.from_json(obj["new_bbox"]),
                expected_revision=rev,
            )
        if op == "accept_detections":
            dets = tuple(Detection.from_json(d) for d in obj["detections"])
            ids = obj.get("box_ids")
            return AcceptDetections(
                detections=dets,
                expected_revision=rev,
                box_ids=tuple(ids) if ids else None,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed '{op}' edit: {exc}") from exc
    raise ParseError(f"unknown edit op '{op}'")


def edit_to_json(edit: Edit) -> dict[str, Any]:
    if isinstance(edit, AddBox):
        out: dict[str, Any] = {
            "op": "add",
            "bbox": edit.bbox.to_json(),
            "class_id": edit.class_id,
            "provenance": edit.provenance,
            "expected_revision": edit.expected_revision,
        }
        if edit.box_id:
            out["box_id"] = edit.box_id
        return out
    if isinstance(edit, RemoveBox):
        return {
            "op": "remove",
            "box_id": edit.box_id,
            "expected_revision": edit.expected_revision,
        }
    if isinstance(edit, AdjustBox):
        return {
            "op": "adjust",
            "box_id": edit.box_id,
            "new_bbox": edit.new_bbox.to_json(),
            "expected_revision": edit.expected_revision,
        }
    if isinstance(edit, AcceptDetections):
        out = {
            "op": "accept_detections",
            "detections": [d.to_json() for d in edit.detections],
            "expected_revision": edit.expected_revision,
        }
        if edit.box_ids:
            out["box_ids"] = list(edit.box_ids)
        return out
    raise ValidationError(f"unknown edit type {type(edit).__name__}")


def _check_bounds(aset: AnnotationSet, bbox: BBox) -> None:
    if aset.width is None or aset.height is None:
        return
    if bbox.x_min < 0 or bbox.y_min < 0 or bbox.x_max > aset.width or bbox.y_max > aset.height:
        raise OutOfBoundsError(
            f"box ({bbox.x_min}, {bbox.y_min}, {bbox.x_max}, {bbox.y_max}) outside "
            f"{aset.width}x{aset.height} image '{aset.image_id}'"
        )


def apply_edit(aset: AnnotationSet, edit: Edit) -> tuple[AnnotationSet, Edit]:
    """Apply one edit, returning the next revision and the realized edit.

    The realized edit is the input with generated box ids filled in; the
    audit log stores it so replay assigns identical ids.
    """
    if edit.expected_revision != aset.revision:
        raise RevisionConflictError(
            f"'{aset.image_id}' is at revision {aset.revision}, "
            f"edit expected {edit.expected_revision}",
            details={"current_revision": aset.revision},
        )
    new_revision = aset.revision + 1

    if isinstance(edit, AddBox):
        _check_bounds(aset, edit.bbox)
        box_id = edit.box_id or f"b{new_revision:04d}"
        if aset.has_box(box_id):
            raise ValidationError(f"box id '{box_id}' already present")
        realized = replace(edit, box_id=box_id)
        new_box = AnnBox(box_id=box_id, bbox=edit.bbox,
                         class_id=edit.class_id, provenance=edit.provenance)
        return (
            replace(aset, boxes=aset.boxes + (new_box,), revision=new_revision),
            realized,
        )

    if isinstance(edit, RemoveBox):
        aset.box(edit.box_id)  # raises UnknownBoxIdError
        boxes = tuple(b for b in aset.boxes if b.box_id != edit.box_id)
        return replace(aset, boxes=boxes, revision=new_revision), edit

    if isinstance(edit, AdjustBox):
        _check_bounds(aset, edit.new_bbox)
        aset.box(edit.box_id)
        boxes = tuple(
            replace(b, bbox=edit.new_bbox, provenance=PROVENANCE_HUMAN)
            if b.box_id == edit.box_id else b
            for b in aset.boxes
        )
        return replace(aset, boxes=boxes, revision=new_revision), edit

    if isinstance(edit, AcceptDetections):
        for d in edit.detections:
            _check_bounds(aset, d.bbox)
        ids = edit.box_ids or tuple(
            f"b{new_revision:04d}-{k}" for k in range(len(edit.detections))
        )
        if len(ids) != len(edit.detections):
            raise ValidationError("box_ids length must match detections")
        for box_id in ids:
            if aset.has_box(box_id):
                raise ValidationError(f"box id '{box_id}' already present")
        realized = replace(edit, box_ids=ids)
        new_boxes = tuple(
            AnnBox(box_id=i, bbox=d.bbox, class_id=d.class_id,
                   provenance=PROVENANCE_ACCEPTED)
            for i, d in zip(ids, edit.detections)
        )
        return (
            replace(aset, boxes=aset.boxes + new_boxes, revision=new_revision),
            realized,
        )

    raise ValidationError(f"unknown edit type {type(edit).__name__}")


# --- persistent store -------------------------------------------------------

class AnnotationStore:
    """One JSON document of current sets plus an append-only audit log.

    Commits serialize per image; reads hand out immutable snapshots.
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.annotations_path = self.root / "annotations.json"
        self.audit_path = self.root / "audit.log"
        self._sets: dict[str, AnnotationSet] = {}
        self._image_locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.RLock()
        self._load()

    def _load(self) -> None:
        if not self.annotations_path.exists():
            return
        try:
            doc = json.loads(self.annotations_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"corrupt annotations store: {exc}") from exc
        for obj in doc.get("images", []):
            aset = AnnotationSet.from_json(obj)
            self._sets[aset.image_id] = aset

    def _persist(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        doc = {
            "images": [self._sets[k].to_json() for k in sorted(self._sets)],
        }
        tmp = self.annotations_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, self.annotations_path)

    def _append_audit(self, record: dict[str, Any]) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.audit_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _lock_for(self, image_id: str) -> threading.Lock:
        with self._store_lock:
            return self._image_locks.setdefault(image_id, threading.Lock())

    # -- public API ----------------------------------------------------------

    def image_ids(self) -> list[str]:
        with self._store_lock:
            return sorted(self._sets)

    def get_set(self, image_id: str) -> Optional[AnnotationSet]:
        with self._store_lock:
            return self._sets.get(image_id)

    def has_set(self, image_id: str) -> bool:
        with self._store_lock:
            return image_id in self._sets

    def ensure_set(
        self, image_id: str,
        width: Optional[int] = None, height: Optional[int] = None,
    ) -> AnnotationSet:
        with self._lock_for(image_id):
            with self._store_lock:
                existing = self._sets.get(image_id)
            if existing is not None:
                return existing
            aset = AnnotationSet(image_id=image_id, width=width, height=height)
            with self._store_lock:
                self._sets[image_id] = aset
                self._append_audit({
                    "type": "create",
                    "image_id": image_id,
                    "width": width,
                    "height": height,
                    "boxes": [],
                })
                self._persist()
            return aset

    def install_sets(self, sets: Iterable[AnnotationSet], overwrite: bool = False) -> None:
        """Install imported revision-0 sets as new base states."""
        with self._store_lock:
            for aset in sets:
                if not overwrite and aset.image_id in self._sets:
                    raise ValidationError(
                        f"annotations for '{aset.image_id}' already exist"
                    )
            for aset in sets:
                self._sets[aset.image_id] = aset
                self._append_audit({
                    "type": "create",
                    "image_id": aset.image_id,
                    "width": aset.width,
                    "height": aset.height,
                    "boxes": [b.to_json() for b in aset.boxes],
                })
            self._persist()

    def commit(self, image_id: str, edit: Edit) -> AnnotationSet:
        with self._lock_for(image_id):
            with self._store_lock:
                current = self._sets.get(image_id)
            if current is None:
                raise UnknownImageIdError(f"no annotation set for image '{image_id}'")
            new_set, realized = apply_edit(current, edit)
            with self._store_lock:
                self._sets[image_id] = new_set
                self._append_audit({
                    "type": "edit",
                    "image_id": image_id,
                    "revision": new_set.revision,
                    "edit": edit_to_json(realized),
                })
                self._persist()
            return new_set

    def replay_audit(self) -> dict[str, AnnotationSet]:
        """Rebuild every set purely from the audit log."""
        sets: dict[str, AnnotationSet] = {}
        if not self.audit_path.exists():
            return sets
        with open(self.audit_path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"audit line {line_no}: {exc}") from exc
                image_id = record["image_id"]
                if record.get("type") == "create":
                    sets[image_id] = AnnotationSet(
                        image_id=image_id,
                        boxes=tuple(AnnBox.from_json(b) for b in record.get("boxes", [])),
                        revision=0,
                        width=record.get("width"),
                        height=record.get("height"),
                    )
                elif record.get("type") == "edit":
                    base = sets.get(image_id)
                    if base is None:
                        raise ParseError(
                            f"audit line {line_no}: edit before create for '{image_id}'"
                        )
                    edit = edit_from_json(record["edit"])
                    sets[image_id], _ = apply_edit(base, edit)
                else:
                    raise ParseError(f"audit line {line_no}: unknown record type")
        return sets
