from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from triad.contracts import LabeledVectors, RandomSource, SampleOrigin, TaskDataset
from triad.core.errors import ReplayProtocolError

logger = logging.getLogger(__name__)


def sample_replay_labels(
    task_classes: Mapping[int, Sequence[int]],
    t: int,
    n: int,
    rng: RandomSource,
) -> np.ndarray:
    """Labels drawn uniformly over every class of tasks 1..t."""
    if t < 1:
        raise ReplayProtocolError("replay labels need t >= 1")
    if n < 1:
        raise ReplayProtocolError("replay label count must be >= 1")
    support: list[int] = []
    for task in range(1, t + 1):
        if task not in task_classes:
            raise ReplayProtocolError(f"classes of task {task} are unknown")
        support.extend(int(c) for c in task_classes[task])
    pool = np.asarray(support, dtype=np.int64)
    return pool[rng.integers(0, pool.shape[0], n)]


def balanced_labels(classes: Sequence[int], n: int) -> np.ndarray:
    ordered = np.asarray(classes, dtype=np.int64)
    return ordered[np.arange(n) % ordered.shape[0]]


@dataclass(slots=True)
class ReplayDataset:
    """S' = S_t ∪ Ŝ_{<t} with a per-sample origin flag."""

    x: np.ndarray
    y: np.ndarray
    origin: np.ndarray

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def real(self) -> LabeledVectors:
        keep = self.origin == SampleOrigin.REAL
        return LabeledVectors(self.x[keep], self.y[keep])

    def generated(self) -> LabeledVectors:
        keep = self.origin == SampleOrigin.GENERATED
        return LabeledVectors(self.x[keep], self.y[keep])


@dataclass(slots=True)
class ReplayState:
    t: int = 0
    task_classes: dict[int, tuple[int, ...]] = field(default_factory=dict)
    generated: dict[int, LabeledVectors] = field(default_factory=dict)
    replay_size: int | None = None

    def classes_through(self, t: int) -> list[int]:
        return [c for task in range(1, t + 1) for c in self.task_classes.get(task, ())]

    def store(self, task: int, samples: LabeledVectors) -> None:
        allowed = set(self.task_classes.get(task, ()))
        if not allowed or not set(np.unique(samples.y).tolist()) <= allowed:
            raise ReplayProtocolError(f"generated set for task {task} carries labels outside its classes")
        self.generated[task] = samples


def build_replay_dataset(state: ReplayState, current: LabeledVectors) -> ReplayDataset:
    xs = [current.x]
    ys = [current.y.astype(np.int64)]
    origins = [np.full(len(current), SampleOrigin.REAL, dtype=np.int8)]
    earlier = set(state.classes_through(state.t - 1))
    for task in range(1, state.t):
        samples = state.generated.get(task)
        if samples is None:
            raise ReplayProtocolError(f"no generated set for task {task}")
        if not set(np.unique(samples.y).tolist()) <= earlier:
            raise ReplayProtocolError(f"generated set for task {task} has labels of later tasks")
        xs.append(samples.x)
        ys.append(samples.y.astype(np.int64))
        origins.append(np.full(len(samples), SampleOrigin.GENERATED, dtype=np.int8))
    return ReplayDataset(np.concatenate(xs, axis=0), np.concatenate(ys), np.concatenate(origins))


class TaskStream:
    """Hands out each task's training data once; released tasks stay closed."""

    def __init__(self, tasks: Sequence[TaskDataset]) -> None:
        self._tasks = {task.task_id: task for task in tasks}
        self._released: set[int] = set()

    @property
    def task_ids(self) -> list[int]:
        return sorted(self._tasks)

    def classes(self, task_id: int) -> tuple[int, ...]:
        return self._task(task_id).classes

    def train(self, task_id: int) -> LabeledVectors:
        if task_id in self._released:
            raise ReplayProtocolError(f"training data of task {task_id} was released")
        return self._task(task_id).train()

    def test(self, task_id: int) -> LabeledVectors:
        return self._task(task_id).test()

    def release(self, task_id: int) -> None:
        self._task(task_id)
        self._released.add(task_id)
        logger.debug("released training data of task %d", task_id)

    def is_released(self, task_id: int) -> bool:
        return task_id in self._released

    def _task(self, task_id: int) -> TaskDataset:
        if task_id not in self._tasks:
            raise ReplayProtocolError(f"unknown task {task_id}")
        return self._tasks[task_id]
