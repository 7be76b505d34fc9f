"""Image indexing and deterministic dataset splitting.

The split must be reproducible across runs, platforms, and language
runtimes, so the shuffle is pinned down completely: sort image ids
lexicographically, then Fisher–Yates driven by a splitmix64 stream
seeded with the split seed (j = next() mod (i+1), swapping indices i
and j for i from N-1 down to 1).  Part sizes use half-up rounding of
the val and test ratios; train takes the remainder.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from PIL import Image, UnidentifiedImageError

from .annotations import AnnotationStore
from .errors import (
    BadRatiosError,
    DirUnreadableError,
    DuplicateImageIdError,
    MissingAnnotationsError,
    TooFewImagesError,
)
from .evaluation import GroundTruth

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}

PARTS = ("train", "val", "test")
DEFAULT_RATIOS = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str  # filename stem
    path: Path
    width: int
    height: int

    def to_json(self, relative_to: Optional[Path] = None) -> dict[str, Any]:
        path = self.path
        if relative_to is not None:
            try:
                path = path.relative_to(relative_to)
            except ValueError:
                pass
        return {
            "image_id": self.image_id,
            "path": str(path),
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any], base: Optional[Path] = None) -> "ImageRecord":
        path = Path(obj["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        return cls(
            image_id=str(obj["image_id"]),
            path=path,
            width=int(obj["width"]),
            height=int(obj["height"]),
        )


def scan_directory(path: Union[str, Path]) -> list[ImageRecord]:
    """Records for every decodable image, sorted by filename."""
    directory = Path(path)
    if not directory.is_dir():
        raise DirUnreadableError(f"not a readable directory: {directory}")
    try:
        entries = sorted(p for p in directory.iterdir() if p.is_file())
    except OSError as exc:
        raise DirUnreadableError(f"cannot list {directory}: {exc}") from exc

    records: list[ImageRecord] = []
    seen: dict[str, Path] = {}
    for entry in entries:
        if entry.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        try:
            with Image.open(entry) as img:
                width, height = img.size
        except (UnidentifiedImageError, OSError):
            continue  # not decodable; skip rather than fail the scan
        stem = entry.stem
        if stem in seen:
            raise DuplicateImageIdError(
                f"image id '{stem}' appears twice: {seen[stem].name} and {entry.name}"
            )
        seen[stem] = entry
        records.append(ImageRecord(image_id=stem, path=entry, width=width, height=height))
    return records


# --- seeded shuffle ---------------------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64 PRNG; tiny, portable, and fully specified."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64


def seeded_shuffle(items: Sequence[str], seed: int) -> list[str]:
    """Fisher–Yates over a splitmix64 stream; index by modulo."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class DatasetSplit:
    seed: int
    ratios: tuple[float, float, float]  # train, val, test
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def part(self, name: str) -> tuple[str, ...]:
        if name not in PARTS:
            raise BadRatiosError(f"unknown part '{name}'; expected one of {PARTS}")
        return getattr(self, name)

    def to_json(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "DatasetSplit":
        return cls(
            seed=int(obj["seed"]),
            ratios=tuple(float(r) for r in obj["ratios"]),
            train=tuple(obj["train"]),
            val=tuple(obj["val"]),
            test=tuple(obj["test"]),
        )


def split_dataset(
    image_ids: Sequence[str],
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> DatasetSplit:
    """Deterministic partition: first |test| of the shuffle, then |val|,
    remainder train."""
    if len(ratios) != 3:
        raise BadRatiosError(f"need (train, val, test) ratios, got {ratios}")
    if any(r < 0 for r in ratios):
        raise BadRatiosError(f"ratios must be nonnegative: {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatiosError(f"ratios sum to {sum(ratios)}, expected 1")
    n = len(image_ids)
    if all(r > 0 for r in ratios) and n < 3:
        raise TooFewImagesError(f"{n} images cannot fill three non-empty parts")

    ordered = sorted(image_ids)
    if len(set(ordered)) != n:
        raise DuplicateImageIdError("image index contains duplicate ids")
    shuffled = seeded_shuffle(ordered, seed)

    n_val = _round_half_up(ratios[1] * n)
    n_test = _round_half_up(ratios[2] * n)
    if n_val + n_test > n:
        raise BadRatiosError(
            f"rounded val ({n_val}) + test ({n_test}) exceed {n} images"
        )
    test = tuple(shuffled[:n_test])
    val = tuple(shuffled[n_test:n_test + n_val])
    train = tuple(shuffled[n_test + n_val:])
    return DatasetSplit(seed=seed, ratios=tuple(ratios), train=train, val=val, test=test)


def save_split(split: DatasetSplit, path: Union[str, Path]) -> None:
    """Canonical serialization: byte-identical for identical splits."""
    payload = json.dumps(split.to_json(), indent=1, sort_keys=True) + "\n"
    path = Path(path)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(payload, encoding="utf-8")
    os.replace(tmp, path)


def load_split(path: Union[str, Path]) -> DatasetSplit:
    return DatasetSplit.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def pair_with_annotations(
    split: DatasetSplit,
    store: AnnotationStore,
) -> dict[str, dict[str, list[GroundTruth]]]:
    """Evaluation-ready ground truth per part; every member must have an
    annotation set (an empty one counts)."""
    missing = [
        image_id
        for part in PARTS
        for image_id in split.part(part)
        if not store.has_set(image_id)
    ]
    if missing:
        raise MissingAnnotationsError(
            f"no annotation sets for: {', '.join(sorted(missing))}",
            details={"image_ids": sorted(missing)},
        )
    out: dict[str, dict[str, list[GroundTruth]]] = {}
    for part in PARTS:
        part_gts: dict[str, list[GroundTruth]] = {}
        for image_id in split.part(part):
            aset = store.get_set(image_id)
            part_gts[image_id] = [
                GroundTruth(bbox=b.bbox, class_id=b.class_id) for b in aset.boxes
            ]
        out[part] = part_gts
    return out
