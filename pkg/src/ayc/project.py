"""Project directory: the single on-disk home for a lab's workbench state.

Layout under the project root:

    images/           source images (default scan target)
    annotations.json  canonical annotation store
    audit.log         append-only edit trail
    index.json        scanned image records
    split.json        persisted train/val/test split
    models.json       registered model manifests
    logs/<id>.json    ingested training-loss series
    benchmarks/<run>.json
    project.json      class names and other settings
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from .annotations import AnnotationStore
from .dataset import (
    DatasetSplit,
    ImageRecord,
    load_split,
    save_split,
    scan_directory,
    split_dataset,
)
from .errors import (
    ProjectDirUnwritableError,
    UnknownImageIdError,
    UnknownModelIdError,
    ValidationError,
)
from .evaluation import LossSeries
from .manifest import ModelManifest
from .registry import ModelRegistry


class Project:
    def __init__(self, root: Union[str, Path], create: bool = True):
        self.root = Path(root)
        if create:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
                (self.root / "images").mkdir(exist_ok=True)
                (self.root / "logs").mkdir(exist_ok=True)
                (self.root / "benchmarks").mkdir(exist_ok=True)
                probe = self.root / ".write-probe"
                probe.write_text("")
                probe.unlink()
            except OSError as exc:
                raise ProjectDirUnwritableError(
                    f"project dir {self.root} is not writable: {exc}"
                ) from exc
        elif not self.root.is_dir():
            raise ProjectDirUnwritableError(f"project dir {self.root} does not exist")

        self.store = AnnotationStore(self.root)
        self.registry = ModelRegistry()
        self._settings = self._load_json("project.json") or {}
        self._index: dict[str, ImageRecord] = {}
        self._load_index()
        self._load_models()

    # -- small JSON helpers --------------------------------------------------

    def _load_json(self, name: str) -> Optional[Any]:
        path = self.root / name
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _save_json(self, name: str, payload: Any) -> None:
        path = self.root / name
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    # -- settings --------------------------------------------------------

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(self._settings.get("class_names", ("chromosome",)))

    def set_class_names(self, names: Sequence[str]) -> None:
        if not names:
            raise ValidationError("class_names must be non-empty")
        self._settings["class_names"] = list(names)
        self._save_json("project.json", self._settings)

    # -- images ----------------------------------------------------------

    @property
    def images_dir(self) -> Path:
        return self.root / "images"

    def _load_index(self) -> None:
        doc = self._load_json("index.json")
        if not doc:
            return
        for obj in doc.get("images", []):
            record = ImageRecord.from_json(obj, base=self.root)
            self._index[record.image_id] = record

    def scan_images(self, path: Optional[Union[str, Path]] = None) -> list[ImageRecord]:
        records = scan_directory(path or self.images_dir)
        self._index = {r.image_id: r for r in records}
        self._save_json(
            "index.json",
            {"images": [r.to_json(relative_to=self.root) for r in records]},
        )
        return records

    def image_records(self) -> list[ImageRecord]:
        return [self._index[k] for k in sorted(self._index)]

    def image_record(self, image_id: str) -> ImageRecord:
        if image_id not in self._index:
            raise UnknownImageIdError(f"image '{image_id}' not in project index")
        return self._index[image_id]

    # -- split -------------------------------------------------------------

    @property
    def split_path(self) -> Path:
        return self.root / "split.json"

    def make_split(self, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> DatasetSplit:
        split = split_dataset(sorted(self._index), ratios=ratios, seed=seed)
        save_split(split, self.split_path)
        return split

    def load_split(self) -> DatasetSplit:
        if not self.split_path.exists():
            raise ValidationError(
                "project has no split.json; create a split first"
            )
        return load_split(self.split_path)

    # -- models --------------------------------------------------------------

    def _load_models(self) -> None:
        doc = self._load_json("models.json")
        if not doc:
            return
        for obj in doc.get("models", []):
            manifest = ModelManifest.from_json(obj, base_dir=self.root)
            self.registry.register(manifest)
        active = doc.get("active")
        if active:
            self.registry.activate(active)

    def _persist_models(self) -> None:
        manifests = []
        for model_id in self.registry.model_ids():
            descriptor = self.registry.get(model_id)
            manifests.append(descriptor.manifest.to_json())
        self._save_json(
            "models.json",
            {"models": manifests, "active": self.registry.active_id},
        )

    def register_model(self, manifest: ModelManifest):
        descriptor = self.registry.register(manifest)
        self._persist_models()
        return descriptor

    def activate_model(self, model_id: str):
        descriptor = self.registry.activate(model_id)
        self._persist_models()
        return descriptor

    # -- loss logs -------------------------------------------------------

    def save_loss_series(self, series: LossSeries) -> None:
        if not series.model_id:
            raise ValidationError("loss series needs a model_id")
        self._save_json(f"logs/{series.model_id}.json", series.to_json())

    def load_loss_series(self, model_id: str) -> LossSeries:
        doc = self._load_json(f"logs/{model_id}.json")
        if doc is None:
            raise UnknownModelIdError(f"no training log stored for '{model_id}'")
        return LossSeries.from_json(doc)

    # -- benchmarks --------------------------------------------------------

    @property
    def benchmarks_dir(self) -> Path:
        return self.root / "benchmarks"

    def save_benchmark(self, run_id: str, payload: dict[str, Any]) -> None:
        self._save_json(f"benchmarks/{run_id}.json", payload)

    def load_benchmark(self, run_id: str) -> Optional[dict[str, Any]]:
        return self._load_json(f"benchmarks/{run_id}.json")
