from __future__ import annotations

from dataclasses import replace
from typing import Any, Callable

import numpy as np

from triad.contracts import ExperimentConfig, LabeledVectors, TaskDataset
from triad.data import load_dataset

TINY_CONFIG = ExperimentConfig(
    seed=0,
    dataset="gauss2d-10",
    classes_per_task=2,
    num_tasks=2,
    train_per_class=24,
    test_per_class=10,
    epochs_per_task=2,
    batch_size=16,
    n_critic=1,
    fisher_samples=16,
    latent_dim=4,
    label_embedding_dim=2,
    generator_hidden=(8,),
    critic_hidden=(8, 8),
    classifier_hidden=(8, 8),
    mask_scale_max=50.0,
    alignment_real_epochs=2,
    alignment_generated_epochs=2,
)


def tiny_config(**overrides: Any) -> ExperimentConfig:
    return replace(TINY_CONFIG, **overrides)


def tiny_tasks(config: ExperimentConfig | None = None) -> list[TaskDataset]:
    config = config or TINY_CONFIG
    return load_dataset(config.dataset, config)


def blob_data(seed: int, n: int = 12, dim: int = 3, classes: int = 2) -> LabeledVectors:
    rng = np.random.default_rng(seed)
    y = np.arange(n, dtype=np.int64) % classes
    x = rng.normal(size=(n, dim)) + y[:, None]
    return LabeledVectors(x, y)


def finite_difference(
    f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-4
) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    theta = np.array(theta, dtype=np.float64)
    out = np.zeros_like(theta)
    for index in np.ndindex(theta.shape):
        up = theta.copy()
        down = theta.copy()
        up[index] += h
        down[index] -= h
        out[index] = (f(up) - f(down)) / (2.0 * h)
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-8)
    return float(np.max(np.abs(a - b))) / scale


def smooth_finite_difference(
    f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-4
) -> tuple[np.ndarray, np.ndarray]:
    """Central differences plus a mask of the coordinates where ``f`` is smooth.

    A kink or jump within ``h`` of ``theta`` makes the second differences taken
    at ``h`` and ``h / 2`` disagree; those coordinates are left out of the mask.
    """
    theta = np.array(theta, dtype=np.float64)
    out = np.zeros_like(theta)
    smooth = np.zeros(theta.shape, dtype=bool)
    center = f(theta)
    for index in np.ndindex(theta.shape):
        values: dict[float, float] = {}
        for step in (h, -h, h / 2.0, -h / 2.0):
            shifted = theta.copy()
            shifted[index] += step
            values[step] = f(shifted)
        out[index] = (values[h] - values[-h]) / (2.0 * h)
        wide = (values[h] - 2.0 * center + values[-h]) / h**2
        narrow = (values[h / 2.0] - 2.0 * center + values[-h / 2.0]) / (h / 2.0) ** 2
        smooth[index] = abs(wide - narrow) <= 1e-3 * max(1.0, abs(wide))
    return out, smooth
