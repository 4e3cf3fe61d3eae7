from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from triad.contracts import ImportanceSource
from triad.consolidation.fisher import FisherMap
from triad.core.errors import ShapeError

DEFAULT_XI = 0.1


@dataclass(slots=True)
class SIState:
    """Running path integral per parameter plus the parameters at task start."""

    xi: float = DEFAULT_XI
    running: dict[str, np.ndarray] = field(default_factory=dict)
    task_start: dict[str, np.ndarray] = field(default_factory=dict)
    omega: dict[str, np.ndarray] = field(default_factory=dict)

    def begin_task(self, params: Mapping[str, np.ndarray]) -> None:
        self.task_start = {name: np.array(values, copy=True) for name, values in params.items()}
        self.running = {name: np.zeros_like(values) for name, values in self.task_start.items()}


def si_accumulate(
    si: SIState,
    theta_before: Mapping[str, np.ndarray],
    theta_after: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
) -> SIState:
    """w_i += −g_i · Δθ_i for every parameter the step touched."""
    for name, g in grads.items():
        delta = theta_after[name] - theta_before[name]
        if delta.shape != g.shape:
            raise ShapeError(f"SI step for '{name}': gradient {g.shape} vs change {delta.shape}")
        current = si.running.get(name)
        if current is None or current.shape != g.shape:
            current = np.zeros_like(g)
        si.running[name] = current - g * delta
    return si


def si_finalize(
    si: SIState,
    params: Mapping[str, np.ndarray],
    excluded: Iterable[str] = (),
) -> FisherMap:
    """Close the task: ω += relu(w) / (Δθ_task² + ξ), then restart the integral."""
    skipped = frozenset(excluded)
    importance: dict[str, np.ndarray] = {}
    for name, values in params.items():
        if name in skipped:
            importance[name] = np.zeros_like(values)
            continue
        start = si.task_start.get(name)
        path = si.running.get(name)
        if start is None or path is None or start.shape != values.shape:
            contribution = np.zeros_like(values)
        else:
            total_change = values - start
            contribution = np.maximum(path, 0.0) / (total_change * total_change + si.xi)
        previous = si.omega.get(name)
        if previous is not None and previous.shape == contribution.shape:
            contribution = previous + contribution
        importance[name] = contribution
    si.omega = {name: values.copy() for name, values in importance.items()}
    si.begin_task(params)
    return FisherMap(importance, ImportanceSource.PATH_INTEGRAL, frozenset(n for n in params if n in skipped))
