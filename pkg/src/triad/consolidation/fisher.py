from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from triad.autodiff import Graph, Tensor, backward, forward_eval
from triad.contracts import FisherCombine, ImportanceSource, LabeledVectors, RandomSource
from triad.core.errors import ConsolidationError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_FISHER_SAMPLES = 512

LossSpec = Callable[[Mapping[str, Tensor], Tensor, np.ndarray], Tensor]


@dataclass(frozen=True, slots=True)
class FisherMap:
    """Diagonal importance per parameter; excluded names always carry zeros."""

    importance: Mapping[str, np.ndarray]
    source: ImportanceSource
    excluded: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for name, values in self.importance.items():
            if np.any(values < 0):
                raise ConsolidationError(f"importance for '{name}' has negative entries")
            if name in self.excluded and np.any(values != 0):
                raise ConsolidationError(f"excluded parameter '{name}' has nonzero importance")

    def penalized(self) -> list[str]:
        return [name for name in self.importance if name not in self.excluded]

    def combine(self, newer: FisherMap, mode: FisherCombine) -> FisherMap:
        """Merge a fresh estimate into this one; shapes follow ``newer``."""
        if mode is FisherCombine.REPLACE:
            return newer
        merged: dict[str, np.ndarray] = {}
        for name, values in newer.importance.items():
            previous = self.importance.get(name)
            if previous is None or name in newer.excluded:
                merged[name] = values.copy()
            elif previous.shape != values.shape:
                raise ShapeError(f"cannot sum importance for '{name}': {previous.shape} vs {values.shape}")
            else:
                merged[name] = previous + values
        return FisherMap(merged, newer.source, newer.excluded)


@dataclass(frozen=True, slots=True)
class Anchor:
    values: Mapping[str, np.ndarray]
    task: int


def snapshot(params: Mapping[str, np.ndarray], task: int) -> Anchor:
    return Anchor({name: np.array(values, dtype=np.float64, copy=True) for name, values in params.items()}, task)


def estimate_fisher(
    params: Mapping[str, np.ndarray],
    loss_spec: LossSpec,
    dataset: LabeledVectors,
    n_samples: int | None = None,
    *,
    excluded: Iterable[str] = (),
    source: ImportanceSource = ImportanceSource.CUSTOM,
    rng: RandomSource | None = None,
) -> FisherMap:
    """Empirical Fisher: mean squared per-sample gradient of ``loss_spec``.

    Samples are visited in index order (a seeded subset when ``n_samples`` is
    smaller than the dataset) so the reduction order is fixed.
    """
    total = len(dataset)
    if total == 0:
        raise ConsolidationError("cannot estimate importance on an empty dataset")
    count = min(DEFAULT_FISHER_SAMPLES if n_samples is None else n_samples, total)
    if count < 1:
        raise ConsolidationError("n_samples must be >= 1")
    if count < total:
        if rng is None:
            raise ConsolidationError("a random source is required to subsample the dataset")
        indices = np.sort(rng.permutation(total)[:count])
    else:
        indices = np.arange(total)

    skipped = frozenset(excluded)
    trainable = [name for name in params if name not in skipped]
    sums = {name: np.zeros_like(np.asarray(params[name], dtype=np.float64)) for name in trainable}
    for index in indices:
        inputs: dict[str, np.ndarray] = dict(params)
        inputs["x"] = dataset.x[index : index + 1]
        graph = Graph(
            lambda leaves, labels=dataset.y[index : index + 1]: {
                "loss": loss_spec(leaves, leaves["x"], labels)
            },
            leaves=[*params, "x"],
            trainable=trainable,
            name="fisher",
        )
        outputs = forward_eval(graph, inputs)
        grads = backward(graph, outputs["loss"].sum())
        for name in trainable:
            g = grads[name].data
            sums[name] += g * g
    importance = {name: sums[name] / count if name in sums else np.zeros_like(values) for name, values in params.items()}
    logger.debug("estimated %s importance over %d samples", source.value, count)
    return FisherMap(importance, source, frozenset(name for name in params if name in skipped))
