from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from triad.autodiff import Tensor, concat, dense, leaky_relu, no_grad, one_hot
from triad.contracts import RandomSource
from triad.core.errors import MaskError, NetworkError, ShapeError
from triad.networks.masks import MaskSet, prior_cumulative_masks
from triad.networks.parameters import ParameterStore, init_dense

EMBEDDING = "embedding"


class GeneratorNet:
    """Conditional generator G(z, c): z concatenated with a label embedding,
    then a masked dense stack and a linear output layer."""

    def __init__(
        self,
        latent_dim: int,
        embedding_dim: int,
        hidden: Sequence[int],
        data_dim: int,
        rng: RandomSource,
        *,
        scale_max: float = 400.0,
        binarize: bool = False,
    ) -> None:
        if latent_dim < 1 or data_dim < 1 or not hidden:
            raise NetworkError("generator needs latent_dim >= 1, data_dim >= 1 and one hidden layer")
        self.latent_dim = latent_dim
        self.embedding_dim = embedding_dim
        self.hidden = tuple(hidden)
        self.data_dim = data_dim
        self.params = ParameterStore()
        self.params.add(EMBEDDING, np.zeros((0, embedding_dim)))
        fan_in = latent_dim + embedding_dim
        for layer, width in enumerate(self.hidden):
            init_dense(self.params, f"fc{layer}", fan_in, width, rng)
            fan_in = width
        init_dense(self.params, "out", fan_in, data_dim, rng)
        self.masks = MaskSet(widths=self.hidden, scale_max=scale_max, binarize=binarize)
        self.class_to_task: dict[int, int] = {}

    @property
    def num_classes(self) -> int:
        return int(self.params[EMBEDDING].shape[0])

    def layer_names(self, layer: int) -> tuple[str, str]:
        prefix = "out" if layer == len(self.hidden) else f"fc{layer}"
        return f"{prefix}.weight", f"{prefix}.bias"

    def register_task(self, task: int, classes: Sequence[int], rng: RandomSource) -> None:
        """Add embedding rows for ``classes`` and fresh zero mask embeddings."""
        expected = list(range(self.num_classes, self.num_classes + len(classes)))
        if list(classes) != expected:
            raise NetworkError(f"task {task} classes {list(classes)} must continue the label range {expected}")
        rows = rng.normal((len(classes), self.embedding_dim))
        self.params.replace(EMBEDDING, np.vstack([self.params[EMBEDDING], rows]))
        self.masks.add_task(task)
        for label in classes:
            self.class_to_task[int(label)] = task

    def task_of(self, label: int) -> int:
        task = self.class_to_task.get(int(label))
        if task is None:
            raise NetworkError(f"unknown class {label}")
        return task

    def gradient_gates(self, t: int) -> dict[str, np.ndarray]:
        """1 - used capacity of tasks before ``t`` for every generator parameter."""
        prior = prior_cumulative_masks(self.masks, t)
        learned = 1.0 if t > 1 else 0.0
        used = [np.full(self.latent_dim + self.embedding_dim, learned), *prior, np.full(self.data_dim, learned)]
        gates: dict[str, np.ndarray] = {}
        for layer in range(len(self.hidden) + 1):
            weight, bias = self.layer_names(layer)
            below, above = used[layer], used[layer + 1]
            gates[weight] = 1.0 - np.minimum(above[:, None], below[None, :])
            gates[bias] = 1.0 - above
        embedding_gate = np.zeros_like(self.params[EMBEDDING])
        for label, task in self.class_to_task.items():
            if task >= t:
                embedding_gate[label] = 1.0
        gates[EMBEDDING] = embedding_gate
        return gates


def generator_graph(
    params: Mapping[str, Tensor],
    z: Tensor,
    labels: np.ndarray,
    layer_masks: Sequence[Tensor | np.ndarray],
) -> Tensor:
    """Differentiable generator body; ``layer_masks`` broadcast against (batch, width)."""
    num_classes = params[EMBEDDING].shape[0]
    conditioning = Tensor(one_hot(labels, num_classes)) @ params[EMBEDDING]
    hidden = concat([z, conditioning], axis=1)
    for layer, mask in enumerate(layer_masks):
        hidden = leaky_relu(dense(hidden, params[f"fc{layer}.weight"], params[f"fc{layer}.bias"])) * mask
    return dense(hidden, params["out.weight"], params["out.bias"])


def sample_masks(net: GeneratorNet, labels: np.ndarray, *, binarized: bool | None = None) -> list[np.ndarray]:
    """Per-sample masks of the task owning each label, one (batch, width) array per layer."""
    tasks = np.array([net.task_of(int(label)) for label in labels], dtype=np.int64)
    per_layer: list[np.ndarray] = []
    for layer, width in enumerate(net.hidden):
        rows = np.empty((labels.shape[0], width))
        for task in np.unique(tasks):
            rows[tasks == task] = net.masks.mask(int(task), layer, binarized=binarized)
        per_layer.append(rows)
    return per_layer


def training_masks(
    net: GeneratorNet,
    labels: np.ndarray,
    t: int,
    current: Sequence[Tensor],
) -> list[Tensor]:
    """Per-sample masks for the G step: rows of task ``t`` take the trainable
    ``current`` masks, rows of earlier tasks their frozen masks."""
    if len(current) != len(net.hidden):
        raise ShapeError(f"{len(current)} current masks for {len(net.hidden)} hidden layers")
    own = np.array([net.task_of(int(label)) == t for label in labels], dtype=np.float64)[:, None]
    frozen = sample_masks(net, labels)
    return [Tensor(own) * mask + Tensor(rows * (1.0 - own)) for mask, rows in zip(current, frozen)]


def generator_forward(
    net: GeneratorNet,
    z: np.ndarray | Tensor,
    c: int | Sequence[int] | np.ndarray,
    t: int,
    *,
    binarized: bool | None = None,
) -> Tensor:
    latent = z if isinstance(z, Tensor) else Tensor(z)
    if latent.ndim == 1:
        latent = latent.reshape((1, latent.shape[0]))
    labels = np.atleast_1d(np.asarray(c, dtype=np.int64))
    if latent.shape != (labels.shape[0], net.latent_dim):
        raise ShapeError(f"latent batch {latent.shape} does not match {labels.shape[0]} labels of dim {net.latent_dim}")
    for label in labels:
        if net.task_of(int(label)) > t:
            raise MaskError(f"class {int(label)} belongs to a task after {t}")
    masks = sample_masks(net, labels, binarized=binarized)
    with no_grad():
        return generator_graph(net.params.as_tensors(()), latent, labels, masks)
