from __future__ import annotations

import numpy as np

from triad.autodiff.tensor import Tensor, lift
from triad.core.errors import ShapeError

LEAKY_SLOPE = 0.2


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """y = x Wᵀ + b with W laid out as (out_features, in_features)."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense: input {x.describe()} does not fit weight {weight.describe()}")
    return x @ weight.T + bias


def relu(x: Tensor) -> Tensor:
    return x.relu()


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    return x.leaky_relu(slope)


def sigmoid(x: Tensor) -> Tensor:
    return x.sigmoid()


def tanh(x: Tensor) -> Tensor:
    return x.tanh()


def log_softmax(logits: Tensor, axis: int = -1) -> Tensor:
    shift = Tensor(np.max(logits.data, axis=axis, keepdims=True))
    shifted = logits - shift
    return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()


def softmax(logits: Tensor, axis: int = -1) -> Tensor:
    return log_softmax(logits, axis=axis).exp()


def one_hot(labels: np.ndarray, width: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= width):
        raise ShapeError(f"labels out of range for {width} classes")
    encoded = np.zeros((labels.shape[0], width))
    encoded[np.arange(labels.shape[0]), labels] = 1.0
    return encoded


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    targets = one_hot(labels, logits.shape[1])
    return -(log_softmax(logits) * targets).sum(axis=1).mean()


def soft_cross_entropy(logits: Tensor, target_probs: Tensor | np.ndarray) -> Tensor:
    targets = lift(target_probs).detach()
    if targets.shape != logits.shape:
        raise ShapeError(f"soft targets {targets.describe()} do not match logits {logits.describe()}")
    return -(log_softmax(logits) * targets).sum(axis=1).mean()

