from __future__ import annotations

import hashlib

import numpy as np

from triad.contracts import RandomSource


class NumpyRandomSource(RandomSource):
    """Seeded PCG64 stream; substreams are derived from the seed, not from draws."""

    def __init__(self, seed: int | None = None) -> None:
        self._seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))

    @property
    def seed(self) -> int | None:
        return self._seed

    def normal(self, size: int | tuple[int, ...], scale: float = 1.0) -> np.ndarray:
        return self._rng.normal(0.0, scale, size=size)

    def uniform(self, low: float, high: float, size: int | tuple[int, ...]) -> np.ndarray:
        return self._rng.uniform(low, high, size=size)

    def integers(self, low: int, high: int, size: int | tuple[int, ...]) -> np.ndarray:
        return self._rng.integers(low, high, size=size, dtype=np.int64)

    def permutation(self, n: int) -> np.ndarray:
        return self._rng.permutation(n)

    def spawn(self, substream_id: str) -> NumpyRandomSource:
        seed = self._seed
        if seed is None:
            return NumpyRandomSource(seed=None)
        digest = hashlib.sha256(f"{seed}:{substream_id}".encode("ascii", "ignore")).hexdigest()
        child_seed = int(digest[:16], 16)
        return NumpyRandomSource(seed=child_seed)


def seeded_random(seed: int) -> NumpyRandomSource:
    return NumpyRandomSource(seed=seed)
