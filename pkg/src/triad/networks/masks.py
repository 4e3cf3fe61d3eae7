from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from triad.autodiff import Tensor
from triad.core.errors import MaskError, ShapeError

logger = logging.getLogger(__name__)


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * values))


@dataclass(slots=True)
class MaskSet:
    """Per-task, per-layer attention embeddings with their sigmoid masks.

    Masks of completed tasks use ``scale_max``; the task being trained uses
    the current annealed ``scale``. Embeddings start at zero, i.e. every mask
    value starts at 0.5.
    """

    widths: tuple[int, ...]
    scale_max: float = 400.0
    binarize_threshold: float = 0.5
    binarize: bool = False
    scale: float = 1.0
    embeddings: dict[int, list[np.ndarray]] = field(default_factory=dict)
    completed: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not 0.0 < self.binarize_threshold < 1.0:
            raise MaskError("binarize_threshold must lie in (0, 1)")
        if self.scale_max <= 0 or self.scale <= 0:
            raise MaskError("mask scales must be positive")

    @property
    def tasks(self) -> list[int]:
        return sorted(self.embeddings)

    @property
    def depth(self) -> int:
        return len(self.widths)

    def add_task(self, task: int) -> None:
        if task in self.embeddings:
            raise MaskError(f"task {task} already has mask embeddings")
        self.embeddings[task] = [np.zeros(width) for width in self.widths]

    def set_embedding(self, task: int, layer: int, values: np.ndarray) -> None:
        if task in self.completed:
            raise MaskError(f"task {task} masks are frozen")
        current = self._embedding(task, layer)
        if current.shape != values.shape:
            raise ShapeError(f"mask embedding {task}/{layer} has shape {current.shape}, got {values.shape}")
        self.embeddings[task][layer] = np.array(values, dtype=np.float64)

    def complete(self, task: int) -> None:
        self._embedding(task, 0)
        self.completed.add(task)
        logger.debug("froze masks of task %d", task)

    def mask(self, task: int, layer: int, *, binarized: bool | None = None) -> np.ndarray:
        embedding = self._embedding(task, layer)
        frozen = task in self.completed
        scale = self.scale_max if frozen else self.scale
        values = _sigmoid(scale * embedding)
        use_binary = (self.binarize and frozen) if binarized is None else binarized
        if use_binary:
            return (values > self.binarize_threshold).astype(np.float64)
        return values

    def mask_tensor(self, embedding: Tensor, scale: float | None = None) -> Tensor:
        return (embedding * (self.scale if scale is None else scale)).sigmoid()

    def _embedding(self, task: int, layer: int) -> np.ndarray:
        if task not in self.embeddings:
            raise MaskError(f"no masks exist for task {task}")
        if not 0 <= layer < self.depth:
            raise MaskError(f"layer {layer} outside 0..{self.depth - 1}")
        return self.embeddings[task][layer]


def cumulative_mask(
    mask_set: MaskSet,
    layer: int,
    t: int,
    *,
    binarized: bool | None = None,
) -> Tensor:
    """Elementwise running maximum of the masks of tasks 1..t."""
    if t < 1:
        raise MaskError("cumulative mask needs t >= 1")
    result = np.zeros(mask_set.widths[layer])
    for task in range(1, t + 1):
        result = np.maximum(result, mask_set.mask(task, layer, binarized=binarized))
    return Tensor(result)


def prior_cumulative_masks(mask_set: MaskSet, t: int, *, binarized: bool | None = None) -> list[np.ndarray]:
    """m_{<t} per layer; all zeros for the first task."""
    if t <= 1:
        return [np.zeros(width) for width in mask_set.widths]
    return [cumulative_mask(mask_set, layer, t - 1, binarized=binarized).data for layer in range(mask_set.depth)]


def mask_sparsity_penalty(m_t: Sequence[Tensor], m_lt: Sequence[Tensor | np.ndarray]) -> Tensor:
    if len(m_t) != len(m_lt):
        raise ShapeError(f"{len(m_t)} current masks against {len(m_lt)} cumulative masks")
    numerator: Tensor | None = None
    denominator = 0.0
    for current, previous in zip(m_t, m_lt):
        free = 1.0 - (previous.data if isinstance(previous, Tensor) else np.asarray(previous, dtype=np.float64))
        if free.shape != current.shape:
            raise ShapeError(f"mask shapes differ: {current.shape} vs {free.shape}")
        term = (current * free).sum()
        numerator = term if numerator is None else numerator + term
        denominator += float(free.sum())
    if numerator is None or denominator == 0.0:
        return Tensor(0.0)
    return numerator / denominator


def annealed_scale(batch_index: int, total_batches: int, scale_max: float) -> float:
    """Linear schedule from 1 to ``scale_max`` across a task's batches."""
    if total_batches <= 1:
        return scale_max
    fraction = min(max(batch_index, 0), total_batches - 1) / (total_batches - 1)
    return 1.0 + (scale_max - 1.0) * fraction
