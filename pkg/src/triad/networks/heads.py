from __future__ import annotations

import logging
from typing import Mapping, Sequence

import numpy as np

from triad.autodiff import Tensor, dense, leaky_relu, no_grad, softmax
from triad.contracts import RandomSource
from triad.core.errors import NetworkError, ShapeError
from triad.networks.parameters import ParameterStore, init_dense

logger = logging.getLogger(__name__)

NEW_ROW_STD = 0.01


class HeadedNet:
    """Shared plumbing of the two networks that end in an expandable class head."""

    output_prefix = "out"

    def __init__(self, data_dim: int, hidden: Sequence[int]) -> None:
        if data_dim < 1 or not hidden:
            raise NetworkError("networks need data_dim >= 1 and at least one hidden layer")
        self.data_dim = data_dim
        self.hidden = tuple(hidden)
        self.params = ParameterStore()
        self.expansions: list[tuple[int, int]] = []

    @property
    def num_classes(self) -> int:
        return int(self.params[f"{self.output_prefix}.weight"].shape[0])

    @property
    def output_names(self) -> frozenset[str]:
        return frozenset({f"{self.output_prefix}.weight", f"{self.output_prefix}.bias"})

    def check_input(self, x: Tensor) -> Tensor:
        if x.ndim == 1:
            x = x.reshape((1, x.shape[0]))
        if x.ndim != 2 or x.shape[1] != self.data_dim:
            raise ShapeError(f"expected inputs of width {self.data_dim}, got {x.describe()}")
        return x


class CriticNet(HeadedNet):
    """Shared trunk with a Wasserstein critic head (D) and an auxiliary class head (D')."""

    output_prefix = "aux_head"

    def __init__(self, data_dim: int, hidden: Sequence[int], rng: RandomSource) -> None:
        super().__init__(data_dim, hidden)
        fan_in = data_dim
        for layer, width in enumerate(self.hidden):
            init_dense(self.params, f"trunk.fc{layer}", fan_in, width, rng)
            fan_in = width
        init_dense(self.params, "critic_head", fan_in, 1, rng)
        self.params.add("aux_head.weight", np.zeros((0, fan_in)))
        self.params.add("aux_head.bias", np.zeros(0))

    @property
    def trunk_names(self) -> tuple[str, ...]:
        return tuple(name for name in self.params if name.startswith("trunk."))

    @property
    def critic_names(self) -> tuple[str, ...]:
        return (*self.trunk_names, "critic_head.weight", "critic_head.bias")

    @property
    def aux_names(self) -> tuple[str, ...]:
        return (*self.trunk_names, "aux_head.weight", "aux_head.bias")

    def trunk_groups(self) -> list[str]:
        """Shared-trunk parameter groups, shallow to deep."""
        return [f"trunk.fc{layer}" for layer in range(len(self.hidden))]


class ClassifierNet(HeadedNet):
    """Independent classifier C; same layer layout as the critic trunk plus an ``out`` head."""

    def __init__(self, data_dim: int, hidden: Sequence[int], rng: RandomSource) -> None:
        super().__init__(data_dim, hidden)
        fan_in = data_dim
        for layer, width in enumerate(self.hidden):
            init_dense(self.params, f"fc{layer}", fan_in, width, rng)
            fan_in = width
        self.params.add("out.weight", np.zeros((0, fan_in)))
        self.params.add("out.bias", np.zeros(0))


def critic_features(params: Mapping[str, Tensor], x: Tensor, depth: int, prefix: str = "trunk.fc") -> Tensor:
    hidden = x
    for layer in range(depth):
        hidden = leaky_relu(dense(hidden, params[f"{prefix}{layer}.weight"], params[f"{prefix}{layer}.bias"]))
    return hidden


def critic_score(params: Mapping[str, Tensor], x: Tensor, depth: int) -> Tensor:
    features = critic_features(params, x, depth)
    score = dense(features, params["critic_head.weight"], params["critic_head.bias"])
    return score.reshape((score.shape[0],))


def aux_logits(params: Mapping[str, Tensor], x: Tensor, depth: int) -> Tensor:
    features = critic_features(params, x, depth)
    return dense(features, params["aux_head.weight"], params["aux_head.bias"])


def classifier_logits(params: Mapping[str, Tensor], x: Tensor, depth: int) -> Tensor:
    features = critic_features(params, x, depth, prefix="fc")
    return dense(features, params["out.weight"], params["out.bias"])


def discriminator_forward(net: CriticNet, x: np.ndarray | Tensor) -> Tensor:
    inputs = net.check_input(x if isinstance(x, Tensor) else Tensor(x))
    with no_grad():
        return critic_score(net.params.as_tensors(()), inputs, len(net.hidden))


def aux_classifier_forward(net: CriticNet, x: np.ndarray | Tensor) -> Tensor:
    if net.num_classes < 1:
        raise NetworkError("auxiliary head has no learned classes")
    inputs = net.check_input(x if isinstance(x, Tensor) else Tensor(x))
    with no_grad():
        return softmax(aux_logits(net.params.as_tensors(()), inputs, len(net.hidden)))


def classifier_forward(net: ClassifierNet, x: np.ndarray | Tensor) -> Tensor:
    if net.num_classes < 1:
        raise NetworkError("classifier has no learned classes")
    inputs = net.check_input(x if isinstance(x, Tensor) else Tensor(x))
    with no_grad():
        return softmax(classifier_logits(net.params.as_tensors(()), inputs, len(net.hidden)))


def expand_output_layer(net: HeadedNet, new_total_classes: int, rng: RandomSource) -> HeadedNet:
    """Append class rows N(0, 0.01) with zero bias; existing rows stay bit-identical."""
    current = net.num_classes
    if new_total_classes <= current:
        raise NetworkError(f"cannot expand output layer from {current} to {new_total_classes} classes")
    weight_name, bias_name = f"{net.output_prefix}.weight", f"{net.output_prefix}.bias"
    weight = net.params[weight_name]
    added = new_total_classes - current
    net.params.replace(weight_name, np.vstack([weight, rng.normal((added, weight.shape[1]), scale=NEW_ROW_STD)]))
    net.params.replace(bias_name, np.concatenate([net.params[bias_name], np.zeros(added)]))
    net.expansions.append((current, new_total_classes))
    logger.debug("expanded %s from %d to %d classes", weight_name, current, new_total_classes)
    return net
