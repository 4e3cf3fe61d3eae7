from .functional import (
    cross_entropy,
    dense,
    leaky_relu,
    log_softmax,
    one_hot,
    relu,
    sigmoid,
    soft_cross_entropy,
    softmax,
    tanh,
)
from .graph import GradientMap, Graph, backward, forward_eval, grad, grad_norm, topological_order
from .optim import OptimizerState, apply_gate, optimizer_step
from .tensor import Tensor, concat, enable_grad, is_grad_enabled, lift, no_grad, zeros

__all__ = [
    "GradientMap",
    "Graph",
    "OptimizerState",
    "Tensor",
    "apply_gate",
    "backward",
    "concat",
    "cross_entropy",
    "dense",
    "enable_grad",
    "forward_eval",
    "grad",
    "grad_norm",
    "is_grad_enabled",
    "leaky_relu",
    "lift",
    "log_softmax",
    "no_grad",
    "one_hot",
    "optimizer_step",
    "relu",
    "sigmoid",
    "soft_cross_entropy",
    "softmax",
    "tanh",
    "topological_order",
    "zeros",
]
