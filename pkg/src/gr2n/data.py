"""Scenes, padding to a fixed node count, batching, class weights and JSONL I/O.

A scene is the per-image sample: ``N`` person feature vectors and a partial
map from ordered pairs ``(i, j)``, ``i != j``, to relation class indices.
Pairs absent from the map are unlabeled and never contribute to a loss.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UNLABELED = -1
FORMAT_VERSION = 1


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Scene:
    id: str
    features: np.ndarray
    labels: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError(f"scene {self.id}: features must be an (N>=1, F) array, got {feats.shape}")
        if not np.isfinite(feats).all():
            raise ValueError(f"scene {self.id}: non-finite feature entries")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        n = feats.shape[0]
        labels = {}
        for (i, j), k in self.labels.items():
            i, j, k = int(i), int(j), int(k)
            if i == j:
                raise ValueError(f"scene {self.id}: self-pair label at ({i}, {j})")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"scene {self.id}: pair ({i}, {j}) outside 0..{n - 1}")
            if k < 0:
                raise ValueError(f"scene {self.id}: negative class index {k}")
            labels[(i, j)] = k
        object.__setattr__(self, "labels", labels)

    @property
    def n_real(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.id == other.id
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and self.labels == other.labels
        )

    def check_classes(self, num_classes: int) -> None:
        for pair, k in self.labels.items():
            if k >= num_classes:
                raise ValueError(f"scene {self.id}: class {k} at {pair} outside [0, {num_classes})")


@dataclass(frozen=True, eq=False)
class PaddedScene:
    scene_id: str
    n_real: int
    n_max: int
    features: np.ndarray  # (n_max, F); empty-node rows are zero
    node_mask: np.ndarray  # (n_max,) bool
    pair_mask: np.ndarray  # (n_max, n_max) bool, labeled real pairs
    labels: np.ndarray  # (n_max, n_max) int, UNLABELED where absent


def pad_scene(scene: Scene, n_max: int) -> PaddedScene:
    n = scene.n_real
    if n_max < n:
        raise ValueError(f"scene {scene.id}: n_max={n_max} < n_real={n}")
    feats = np.zeros((n_max, scene.feature_dim))
    feats[:n] = scene.features
    node_mask = np.zeros(n_max, dtype=bool)
    node_mask[:n] = True
    labels = np.full((n_max, n_max), UNLABELED, dtype=np.int64)
    for (i, j), k in scene.labels.items():
        labels[i, j] = k
    return PaddedScene(scene.id, n, n_max, feats, node_mask, labels != UNLABELED, labels)


@dataclass(frozen=True)
class Batch:
    """Stacked padded scenes; every array has leading axis B."""

    scene_ids: tuple[str, ...]
    features: np.ndarray  # (B, n, F)
    node_mask: np.ndarray  # (B, n)
    pair_mask: np.ndarray  # (B, n, n)
    labels: np.ndarray  # (B, n, n)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def n_max(self) -> int:
        return self.features.shape[1]

    @property
    def valid_pairs(self) -> np.ndarray:
        """Ordered pairs of distinct real nodes, shape (B, n, n)."""
        m = self.node_mask
        both = m[:, :, None] & m[:, None, :]
        return both & ~np.eye(self.n_max, dtype=bool)[None]

    def n_labeled(self) -> int:
        return int(self.pair_mask.sum())


def collate(padded: Sequence[PaddedScene]) -> Batch:
    if not padded:
        raise ValueError("cannot collate an empty batch")
    n_max = {p.n_max for p in padded}
    if len(n_max) != 1:
        raise ValueError(f"mixed n_max in batch: {sorted(n_max)}")
    return Batch(
        tuple(p.scene_id for p in padded),
        np.stack([p.features for p in padded]),
        np.stack([p.node_mask for p in padded]),
        np.stack([p.pair_mask for p in padded]),
        np.stack([p.labels for p in padded]),
    )


def as_batch(scenes, n_max: int | None = None) -> Batch:
    """Convenience: a Batch from a Scene, PaddedScene, Batch or a list of scenes."""
    if isinstance(scenes, Batch):
        return scenes
    if isinstance(scenes, (Scene, PaddedScene)):
        scenes = [scenes]
    if all(isinstance(s, PaddedScene) for s in scenes):
        return collate(scenes)
    if n_max is None:
        n_max = max(s.n_real for s in scenes)
    return collate([pad_scene(s, n_max) for s in scenes])


def make_batches(scenes: Sequence[Scene], batch_size: int, n_max: int, seed: int) -> list[list[PaddedScene]]:
    """Shuffle deterministically under ``seed`` and cut into padded batches."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    for s in scenes:
        if s.n_real > n_max:
            raise ValueError(f"scene {s.id}: n_real={s.n_real} exceeds n_max={n_max}")
    order = np.random.default_rng(seed).permutation(len(scenes))
    padded = [pad_scene(scenes[i], n_max) for i in order]
    return [padded[i : i + batch_size] for i in range(0, len(padded), batch_size)]


def class_counts(scenes: Iterable[Scene], num_classes: int) -> np.ndarray:
    counts = np.zeros(num_classes, dtype=np.int64)
    for s in scenes:
        for k in s.labels.values():
            if k >= num_classes:
                raise ValueError(f"scene {s.id}: class {k} outside [0, {num_classes})")
            counts[k] += 1
    return counts


def class_weights(scenes: Iterable[Scene], num_classes: int) -> np.ndarray:
    """w_k = total / (K * count_k): inverse class frequency, frequency-weighted mean 1."""
    counts = class_counts(scenes, num_classes)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"class {int(missing[0])} never observed; cannot reweight")
    return counts.sum() / (num_classes * counts.astype(np.float64))


# --------------------------------------------------------------------------
# JSON Lines dataset format


class Dataset(list):
    """A list of scenes carrying the header of the file it came from."""

    def __init__(self, scenes=(), num_classes: int | None = None, class_names=None, feature_dim=None):
        super().__init__(scenes)
        self.num_classes = num_classes
        self.class_names = list(class_names) if class_names is not None else None
        self.feature_dim = feature_dim


def _scene_record(s: Scene) -> dict:
    return {
        "id": s.id,
        "n_real": s.n_real,
        "features": s.features.tolist(),
        "labels": [{"i": i, "j": j, "k": k} for (i, j), k in sorted(s.labels.items())],
    }


def write_dataset(scenes: Sequence[Scene], path, num_classes: int, class_names: Sequence[str] | None = None) -> None:
    if class_names is None:
        class_names = [f"class_{k}" for k in range(num_classes)]
    if len(class_names) != num_classes:
        raise ValueError("class_names length must equal num_classes")
    dims = {s.feature_dim for s in scenes}
    if len(dims) > 1:
        raise ValueError(f"inconsistent feature dimension across scenes: {sorted(dims)}")
    for s in scenes:
        s.check_classes(num_classes)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if not scenes:
            return
        header = {"version": FORMAT_VERSION, "F": dims.pop(), "K": num_classes, "class_names": list(class_names)}
        fh.write(json.dumps(header) + "\n")
        for s in scenes:
            fh.write(json.dumps(_scene_record(s)) + "\n")


def read_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not any(line.strip() for line in lines):
        return Dataset()

    def parse(lineno: int, text: str) -> dict:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise DatasetFormatError(f"line {lineno}: expected a JSON object")
        return obj

    header = parse(1, lines[0])
    for key in ("version", "F", "K", "class_names"):
        if key not in header:
            raise DatasetFormatError(f"line 1: header missing {key!r}")
    if header["version"] != FORMAT_VERSION:
        raise DatasetFormatError(f"line 1: unsupported version {header['version']}")
    F, K = header["F"], header["K"]
    if len(header["class_names"]) != K:
        raise DatasetFormatError("line 1: class_names length differs from K")

    scenes = []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        rec = parse(lineno, text)
        try:
            feats = np.array(rec["features"], dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != rec["n_real"]:
                raise DatasetFormatError(f"line {lineno}: features do not match n_real={rec['n_real']}")
            if feats.shape[1] != F:
                raise DatasetFormatError(f"line {lineno}: feature dimension {feats.shape[1]} != header F={F}")
            labels = {}
            for lab in rec["labels"]:
                pair = (int(lab["i"]), int(lab["j"]))
                if pair in labels:
                    raise DatasetFormatError(f"line {lineno}: duplicate label for pair {pair}")
                k = int(lab["k"])
                if not 0 <= k < K:
                    raise DatasetFormatError(f"line {lineno}: class {k} outside [0, {K})")
                labels[pair] = k
            scenes.append(Scene(str(rec["id"]), feats, labels))
        except DatasetFormatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"line {lineno}: malformed scene record ({exc})") from None
    return Dataset(scenes, K, header["class_names"], F)
