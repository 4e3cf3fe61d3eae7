from __future__ import annotations

from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from triad.autodiff.tensor import Tensor, enable_grad, no_grad
from triad.core.errors import GraphStateError, NonFiniteError, ShapeError

Builder = Callable[[Mapping[str, Tensor]], Mapping[str, Tensor]]

GRAD_NORM_EPS = 1e-12


def topological_order(roots: Sequence[Tensor], *, grad_only: bool = False) -> list[Tensor]:
    """Return every node reachable from ``roots`` with inputs ahead of consumers."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False) for root in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if grad_only and not parent.requires_grad:
                continue
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def grad(
    output: Tensor,
    inputs: Sequence[Tensor],
    *,
    create_graph: bool = False,
) -> list[Tensor]:
    """Reverse-mode gradients of a scalar ``output`` with respect to ``inputs``.

    With ``create_graph`` the returned gradients are themselves differentiable,
    which is what the gradient-penalty term needs.
    """
    if output.size != 1:
        raise ShapeError(f"grad expects a scalar output, got {output.describe()}")
    seed = Tensor(np.ones(output.shape))
    grads: dict[int, Tensor] = {id(output): seed}
    if output.requires_grad:
        context = enable_grad() if create_graph else no_grad()
        with context:
            for node in reversed(topological_order([output], grad_only=True)):
                upstream = grads.get(id(node))
                if upstream is None or node._backward is None:
                    continue
                for parent, contribution in zip(node.parents, node._backward(upstream)):
                    if contribution is None or not parent.requires_grad:
                        continue
                    previous = grads.get(id(parent))
                    grads[id(parent)] = contribution if previous is None else previous + contribution
    results: list[Tensor] = []
    for tensor in inputs:
        found = grads.get(id(tensor))
        if found is None:
            found = Tensor(np.zeros(tensor.shape))
        elif not create_graph:
            found = found.detach()
        results.append(found)
    return results


def grad_norm(output: Tensor, wrt: Tensor) -> Tensor:
    """Per-row L2 norm of d(sum output)/d(wrt), differentiable for a second pass."""
    (gradient,) = grad(output.sum(), [wrt], create_graph=True)
    squared = (gradient * gradient).sum(axis=1) if gradient.ndim == 2 else (gradient * gradient).sum()
    norm = (squared + GRAD_NORM_EPS).sqrt()
    norm.op = "grad_norm"
    return norm


class GradientMap(Mapping[str, Tensor]):
    """Immutable name → gradient mapping, remembering any gates applied to it."""

    def __init__(
        self,
        grads: Mapping[str, Tensor],
        gates: Mapping[str, np.ndarray] | None = None,
    ) -> None:
        self._grads = dict(grads)
        self._gates = dict(gates or {})

    def __getitem__(self, name: str) -> Tensor:
        return self._grads[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)

    @property
    def gates(self) -> Mapping[str, np.ndarray]:
        return self._gates

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: g.numpy() for name, g in self._grads.items()}

    def merged(self, other: GradientMap) -> GradientMap:
        overlap = set(self._grads) & set(other._grads)
        if overlap:
            raise GraphStateError(f"gradient maps overlap on {sorted(overlap)}")
        return GradientMap({**self._grads, **other._grads}, {**self._gates, **other._gates})


class Graph:
    """Define-by-run computation over named leaves.

    ``builder`` receives the bound leaves and returns named outputs; every
    call to ``forward_eval`` re-records the node list.
    """

    def __init__(
        self,
        builder: Builder,
        leaves: Iterable[str],
        *,
        trainable: Iterable[str] = (),
        name: str = "graph",
    ) -> None:
        self.builder = builder
        self.leaf_names = tuple(leaves)
        self.trainable = frozenset(trainable)
        self.name = name
        self.leaves: dict[str, Tensor] = {}
        self.outputs: dict[str, Tensor] = {}
        self.nodes: list[Tensor] = []
        self.evaluated = False

    def output(self, name: str) -> Tensor:
        if not self.evaluated:
            raise GraphStateError(f"graph '{self.name}' has not been evaluated")
        return self.outputs[name]


def forward_eval(graph: Graph, inputs: Mapping[str, Tensor | np.ndarray | float]) -> dict[str, Tensor]:
    missing = [name for name in graph.leaf_names if name not in inputs]
    if missing:
        raise GraphStateError(f"graph '{graph.name}' is missing leaves {missing}")
    leaves: dict[str, Tensor] = {}
    for name in graph.leaf_names:
        value = inputs[name]
        if isinstance(value, Tensor):
            leaves[name] = value
        else:
            leaves[name] = Tensor(value, requires_grad=name in graph.trainable, name=name)
    graph.evaluated = False
    with enable_grad():
        outputs = dict(graph.builder(leaves))
    nodes = topological_order(list(outputs.values()))
    for out_name, tensor in outputs.items():
        if not np.all(np.isfinite(tensor.data)):
            culprit = next(
                (node for node in nodes if not np.all(np.isfinite(node.data))),
                tensor,
            )
            raise NonFiniteError(
                f"graph '{graph.name}' output '{out_name}' is non-finite; "
                f"first bad node: {culprit.describe()}"
            )
    graph.leaves = leaves
    graph.outputs = outputs
    graph.nodes = nodes
    graph.evaluated = True
    return outputs


def backward(graph: Graph, scalar_loss: Tensor, *, create_graph: bool = False) -> GradientMap:
    if not graph.evaluated:
        raise GraphStateError(f"graph '{graph.name}' has not been evaluated")
    if scalar_loss.shape not in ((), (1,)):
        raise ShapeError(f"loss must be scalar, got {scalar_loss.describe()}")
    names = [
        name
        for name, leaf in graph.leaves.items()
        if leaf.requires_grad and (name in graph.trainable or not graph.trainable)
    ]
    gradients = grad(scalar_loss, [graph.leaves[name] for name in names], create_graph=create_graph)
    return GradientMap(dict(zip(names, gradients)))
