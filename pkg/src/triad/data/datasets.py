from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from triad.contracts import (
    ExperimentConfig,
    LabeledVectors,
    RandomSource,
    TaskDataset,
    ValidationError,
    ValidationIssue,
)
from triad.core import UnknownDatasetError, seeded_random

logger = logging.getLogger(__name__)

DIR_PREFIX = "dir:"
MANIFEST = "manifest.json"

GAUSS_RADIUS = 5.0
GAUSS_STD = 0.6
DIGIT_NOISE = 0.15

_GLYPHS: tuple[tuple[str, ...], ...] = (
    ("..####..", ".#....#.", "#......#", "#......#", "#......#", "#......#", ".#....#.", "..####.."),
    ("...##...", "..###...", ".#.##...", "...##...", "...##...", "...##...", "...##...", ".######."),
    ("..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."),
    (".#####..", "......#.", "......#.", "..####..", "......#.", "......#.", "......#.", ".#####.."),
    (".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..", ".....#.."),
    (".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."),
    ("..####..", ".#......", "#.......", "#.####..", "##....#.", "#......#", ".#....#.", "..####.."),
    (".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."),
    ("..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."),
    ("..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", ".....#..", "..###..."),
)

SyntheticBuilder = Callable[[int, RandomSource, int], LabeledVectors]


def _gauss2d(label: int, rng: RandomSource, count: int) -> LabeledVectors:
    angle = 2.0 * np.pi * label / 10.0
    center = GAUSS_RADIUS * np.array([np.cos(angle), np.sin(angle)])
    x = center + rng.normal((count, 2), scale=GAUSS_STD)
    return LabeledVectors(x, np.full(count, label, dtype=np.int64))


def _digit_template(label: int) -> np.ndarray:
    return np.array([[1.0 if ch == "#" else 0.0 for ch in row] for row in _GLYPHS[label]]).ravel()


def _digits8x8(label: int, rng: RandomSource, count: int) -> LabeledVectors:
    template = _digit_template(label)
    x = np.clip(template + rng.normal((count, template.size), scale=DIGIT_NOISE), 0.0, 1.0)
    return LabeledVectors(x, np.full(count, label, dtype=np.int64))


SYNTHETIC: dict[str, tuple[int, SyntheticBuilder]] = {
    "gauss2d-10": (10, _gauss2d),
    "digits8x8": (10, _digits8x8),
}


def available_datasets() -> list[str]:
    return [*sorted(SYNTHETIC), f"{DIR_PREFIX}<path>"]


def load_dataset(dataset_id: str, config: ExperimentConfig | None = None) -> list[TaskDataset]:
    """Split a dataset's classes into the configured task sequence."""
    config = config or ExperimentConfig()
    if dataset_id in SYNTHETIC:
        num_classes, builder = SYNTHETIC[dataset_id]
        rng = seeded_random(config.seed).spawn(f"dataset:{dataset_id}")
        loader = _synthetic_loader(builder, rng, config)
    elif dataset_id.startswith(DIR_PREFIX):
        root = Path(dataset_id[len(DIR_PREFIX) :])
        manifest_path = root / MANIFEST
        if not manifest_path.exists():
            raise UnknownDatasetError(f"no {MANIFEST} under '{root}'")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        num_classes = len(manifest["classes"])
        loader = _directory_loader(root, [str(c) for c in manifest["classes"]])
    else:
        raise UnknownDatasetError(
            f"unknown dataset '{dataset_id}'; available: {', '.join(available_datasets())}"
        )
    groups = split_classes(num_classes, config.classes_per_task, config.num_tasks, config.allow_ragged, dataset_id)
    tasks = [
        TaskDataset(
            task_id=index + 1,
            classes=group,
            train_loader=lambda group=group: loader(group, "train"),
            test_loader=lambda group=group: loader(group, "test"),
        )
        for index, group in enumerate(groups)
    ]
    logger.info("dataset %s: %d tasks of %s classes", dataset_id, len(tasks), [len(t.classes) for t in tasks])
    return tasks


def split_classes(
    num_classes: int,
    classes_per_task: int,
    num_tasks: int | None,
    allow_ragged: bool,
    dataset_id: str = "<dataset>",
) -> list[tuple[int, ...]]:
    issues: list[ValidationIssue] = []
    if num_classes % classes_per_task and not allow_ragged:
        issues.append(
            ValidationIssue(
                "NON_DIVISIBLE_TASKS",
                "blocking",
                "classes_per_task",
                dataset_id,
                f"{num_classes} classes do not split into tasks of {classes_per_task}; set allow_ragged",
            )
        )
    groups = [
        tuple(range(start, min(start + classes_per_task, num_classes)))
        for start in range(0, num_classes, classes_per_task)
    ]
    if num_tasks is not None and num_tasks > len(groups):
        issues.append(
            ValidationIssue(
                "TOO_MANY_TASKS",
                "blocking",
                "num_tasks",
                dataset_id,
                f"num_tasks={num_tasks} exceeds the {len(groups)} available tasks",
            )
        )
    if issues:
        raise ValidationError(issues)
    return groups if num_tasks is None else groups[:num_tasks]


def _synthetic_loader(
    builder: SyntheticBuilder,
    rng: RandomSource,
    config: ExperimentConfig,
) -> Callable[[Sequence[int], str], LabeledVectors]:
    sizes = {"train": config.train_per_class, "test": config.test_per_class}

    def load(classes: Sequence[int], split: str) -> LabeledVectors:
        parts = [builder(label, rng.spawn(f"{split}:class{label}"), sizes[split]) for label in classes]
        return LabeledVectors(
            np.concatenate([p.x for p in parts], axis=0),
            np.concatenate([p.y for p in parts]),
        )

    return load


def _directory_loader(root: Path, class_names: list[str]) -> Callable[[Sequence[int], str], LabeledVectors]:
    def load(classes: Sequence[int], split: str) -> LabeledVectors:
        xs: list[np.ndarray] = []
        ys: list[np.ndarray] = []
        for label in classes:
            frame = pd.read_csv(root / split / f"{class_names[label]}.csv", float_precision="round_trip")
            xs.append(frame.to_numpy(dtype=np.float64))
            ys.append(np.full(len(frame), label, dtype=np.int64))
        return LabeledVectors(np.concatenate(xs, axis=0), np.concatenate(ys))

    return load


def write_labeled_vector_dir(tasks: Sequence[TaskDataset], root: str | Path) -> Path:
    """Write a task sequence in the layout accepted by ``dir:<path>``."""
    target = Path(root)
    classes = sorted({c for task in tasks for c in task.classes})
    if classes != list(range(len(classes))):
        raise ValueError("task classes must cover 0..K-1")
    feature_dim = 0
    for split in ("train", "test"):
        (target / split).mkdir(parents=True, exist_ok=True)
        for task in tasks:
            data = task.train() if split == "train" else task.test()
            feature_dim = data.feature_dim
            for label in task.classes:
                rows = data.x[data.y == label]
                frame = pd.DataFrame(rows, columns=[f"f{i}" for i in range(rows.shape[1])])
                frame.to_csv(target / split / f"{label}.csv", index=False, float_format="%.17g", lineterminator="\n")
    manifest = {"classes": [str(c) for c in classes], "feature_dim": feature_dim}
    (target / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def data_dim(tasks: Sequence[TaskDataset]) -> int:
    if not tasks:
        raise ValueError("no tasks loaded")
    return tasks[0].test().feature_dim
