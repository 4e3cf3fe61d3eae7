from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from triad.autodiff.graph import GradientMap
from triad.autodiff.tensor import Tensor
from triad.contracts import ExperimentConfig, OptimizerKind
from triad.core.errors import GateError, NonFiniteError, ShapeError


def apply_gate(grads: GradientMap, gate: Mapping[str, Tensor | np.ndarray]) -> GradientMap:
    """Multiply gradients by per-parameter gates in [0, 1]; ungated entries pass through."""
    unknown = sorted(set(gate) - set(grads))
    if unknown:
        raise GateError(f"gates given for parameters without gradients: {unknown}")
    gated: dict[str, Tensor] = {}
    gates = dict(grads.gates)
    for name, g in grads.items():
        if name not in gate:
            gated[name] = g
            continue
        values = gate[name].data if isinstance(gate[name], Tensor) else np.asarray(gate[name], dtype=np.float64)
        if values.shape != g.shape:
            raise GateError(f"gate for '{name}' has shape {values.shape}, gradient has {g.shape}")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise GateError(f"gate for '{name}' leaves [0, 1]")
        gated[name] = Tensor(g.data * values, name=name)
        gates[name] = values * gates[name] if name in gates else np.array(values)
    return GradientMap(gated, gates)


@dataclass(slots=True)
class OptimizerState:
    kind: OptimizerKind
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> OptimizerState:
        return cls(
            kind=config.optimizer,
            learning_rate=config.learning_rate,
            beta1=config.adam_beta1,
            beta2=config.adam_beta2,
            eps=config.adam_eps,
        )

    def reset(self) -> None:
        self.step = 0
        self.first_moment.clear()
        self.second_moment.clear()


def optimizer_step(
    params: Mapping[str, np.ndarray],
    grads: GradientMap,
    state: OptimizerState,
) -> dict[str, np.ndarray]:
    """Return updated copies of the parameters named in ``grads``.

    Entries whose recorded gate is exactly 0 keep their parameter and moment
    values bit-for-bit.
    """
    orphaned = sorted(set(grads) - set(params))
    if orphaned:
        raise ShapeError(f"gradients without matching parameters: {orphaned}")
    for name, g in grads.items():
        if not np.all(np.isfinite(g.data)):
            raise NonFiniteError(f"non-finite gradient for parameter '{name}'")
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient for '{name}' has shape {g.shape}, parameter has {params[name].shape}")

    if state.kind is OptimizerKind.ADAM:
        state.step += 1
    updated: dict[str, np.ndarray] = {}
    for name, g in grads.items():
        theta = params[name]
        gate = grads.gates.get(name)
        if state.kind is OptimizerKind.SGD:
            candidate = theta - state.learning_rate * g.data
        else:
            candidate = _adam_update(name, theta, g.data, gate, state)
        updated[name] = candidate if gate is None else np.where(gate == 0.0, theta, candidate)
    return updated


def _adam_update(
    name: str,
    theta: np.ndarray,
    g: np.ndarray,
    gate: np.ndarray | None,
    state: OptimizerState,
) -> np.ndarray:
    m = state.first_moment.get(name)
    v = state.second_moment.get(name)
    if m is None or m.shape != theta.shape:
        m = np.zeros_like(theta)
        v = np.zeros_like(theta)
    assert v is not None
    m_next = state.beta1 * m + (1.0 - state.beta1) * g
    v_next = state.beta2 * v + (1.0 - state.beta2) * g * g
    if gate is not None:
        frozen = gate == 0.0
        m_next = np.where(frozen, m, m_next)
        v_next = np.where(frozen, v, v_next)
    state.first_moment[name] = m_next
    state.second_moment[name] = v_next
    m_hat = m_next / (1.0 - state.beta1**state.step)
    v_hat = v_next / (1.0 - state.beta2**state.step)
    return theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
