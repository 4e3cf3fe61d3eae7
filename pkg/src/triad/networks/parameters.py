from __future__ import annotations

from typing import Iterable, Iterator, Mapping

import numpy as np

from triad.autodiff import Tensor
from triad.contracts import RandomSource
from triad.core.errors import NetworkError, ShapeError


class ParameterStore(Mapping[str, np.ndarray]):
    """Named float64 parameter arrays of one network.

    Arrays handed out are never mutated in place; ``assign`` swaps in new
    arrays, so snapshots and tensors built earlier keep their values.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None) -> None:
        self._arrays: dict[str, np.ndarray] = {}
        for name, values in (arrays or {}).items():
            self._arrays[name] = np.array(values, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def add(self, name: str, values: np.ndarray) -> None:
        if name in self._arrays:
            raise NetworkError(f"parameter '{name}' already exists")
        self._arrays[name] = np.array(values, dtype=np.float64)

    def replace(self, name: str, values: np.ndarray) -> None:
        if name not in self._arrays:
            raise NetworkError(f"unknown parameter '{name}'")
        self._arrays[name] = np.array(values, dtype=np.float64)

    def assign(self, updates: Mapping[str, np.ndarray]) -> None:
        for name, values in updates.items():
            current = self._arrays.get(name)
            if current is None:
                raise NetworkError(f"unknown parameter '{name}'")
            if current.shape != values.shape:
                raise ShapeError(f"parameter '{name}' has shape {current.shape}, update has {values.shape}")
            self._arrays[name] = np.array(values, dtype=np.float64)

    def slice(self, names: Iterable[str]) -> dict[str, np.ndarray]:
        return {name: self._arrays[name] for name in names}

    def snapshot(self, names: Iterable[str] | None = None) -> dict[str, np.ndarray]:
        selected = self._arrays.keys() if names is None else names
        return {name: self._arrays[name].copy() for name in selected}

    def as_tensors(self, trainable: Iterable[str] | None = None) -> dict[str, Tensor]:
        wanted = set(self._arrays) if trainable is None else set(trainable)
        return {
            name: Tensor(values, requires_grad=name in wanted, name=name)
            for name, values in self._arrays.items()
        }

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: tuple(values.shape) for name, values in self._arrays.items()}


def init_dense(
    store: ParameterStore,
    prefix: str,
    in_features: int,
    out_features: int,
    rng: RandomSource,
) -> None:
    """Uniform(±1/sqrt(fan_in)) weights laid out (out, in), biases alike."""
    bound = 1.0 / np.sqrt(max(in_features, 1))
    store.add(f"{prefix}.weight", rng.uniform(-bound, bound, (out_features, in_features)))
    store.add(f"{prefix}.bias", rng.uniform(-bound, bound, (out_features,)))
