from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np

from triad.core.errors import ShapeError

BackwardFn = Callable[["Tensor"], tuple["Tensor | None", ...]]

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def enable_grad() -> Iterator[None]:
    previous = is_grad_enabled()
    _state.grad_enabled = True
    try:
        yield
    finally:
        _state.grad_enabled = previous


def _frozen(values: np.ndarray) -> np.ndarray:
    view = values.view()
    view.flags.writeable = False
    return view


class Tensor:
    """Immutable float64 array that records the operation which produced it."""

    __slots__ = ("data", "requires_grad", "op", "name", "_parents", "_backward")

    def __init__(self, data: object, requires_grad: bool = False, name: str | None = None) -> None:
        self.data = _frozen(np.asarray(data, dtype=np.float64))
        self.requires_grad = requires_grad
        self.op = "leaf"
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @classmethod
    def _result(cls, data: np.ndarray, parents: tuple[Tensor, ...], backward: BackwardFn, op: str) -> Tensor:
        out = cls(data)
        out.op = op
        if is_grad_enabled():
            out._parents = parents
            if any(p.requires_grad for p in parents):
                out.requires_grad = True
                out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def parents(self) -> tuple[Tensor, ...]:
        return self._parents

    def numpy(self) -> np.ndarray:
        return np.array(self.data)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> Tensor:
        return Tensor(self.data, name=self.name)

    def describe(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"{self.op}{label} shape={self.shape}"

    def __repr__(self) -> str:
        return f"Tensor({self.describe()}, requires_grad={self.requires_grad})"

    # elementwise arithmetic

    def __add__(self, other: object) -> Tensor:
        b = lift(other)
        shape = _broadcast_shape("add", self, b)
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return g.sum_to(a.shape), g.sum_to(b.shape)

        return Tensor._result(np.broadcast_to(self.data + b.data, shape), (a, b), backward, "add")

    def __radd__(self, other: object) -> Tensor:
        return lift(other) + self

    def __sub__(self, other: object) -> Tensor:
        b = lift(other)
        shape = _broadcast_shape("sub", self, b)
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return g.sum_to(a.shape), (-g).sum_to(b.shape)

        return Tensor._result(np.broadcast_to(self.data - b.data, shape), (a, b), backward, "sub")

    def __rsub__(self, other: object) -> Tensor:
        return lift(other) - self

    def __neg__(self) -> Tensor:
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (-g,)

        return Tensor._result(-self.data, (a,), backward, "neg")

    def __mul__(self, other: object) -> Tensor:
        b = lift(other)
        shape = _broadcast_shape("mul", self, b)
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g * b).sum_to(a.shape), (g * a).sum_to(b.shape)

        return Tensor._result(np.broadcast_to(self.data * b.data, shape), (a, b), backward, "mul")

    def __rmul__(self, other: object) -> Tensor:
        return lift(other) * self

    def __truediv__(self, other: object) -> Tensor:
        b = lift(other)
        shape = _broadcast_shape("div", self, b)
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g / b).sum_to(a.shape), (-(g * a) / (b * b)).sum_to(b.shape)

        with np.errstate(divide="ignore", invalid="ignore"):
            values = self.data / b.data
        return Tensor._result(np.broadcast_to(values, shape), (a, b), backward, "div")

    def __rtruediv__(self, other: object) -> Tensor:
        return lift(other) / self

    def __pow__(self, exponent: float) -> Tensor:
        if isinstance(exponent, Tensor):
            raise TypeError("pow supports scalar exponents only")
        p = float(exponent)
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            if p == 2.0:
                return (g * a * 2.0,)
            return (g * (a ** (p - 1.0)) * p,)

        with np.errstate(divide="ignore", invalid="ignore"):
            values = self.data**p
        return Tensor._result(values, (a,), backward, "pow")

    def __matmul__(self, other: object) -> Tensor:
        b = lift(other)
        a = self
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible operands {a.describe()} and {b.describe()}")

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return g @ b.T, a.T @ g

        return Tensor._result(self.data @ b.data, (a, b), backward, "matmul")

    @property
    def T(self) -> Tensor:
        a = self
        if a.ndim != 2:
            raise ShapeError(f"transpose expects a matrix, got {a.describe()}")

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g.T,)

        return Tensor._result(self.data.T, (a,), backward, "transpose")

    # reductions and shape plumbing

    def sum(self, axis: int | None = None, keepdims: bool = False) -> Tensor:
        a = self
        kept = _kept_shape(a.shape, axis)

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g.reshape(kept).broadcast_to(a.shape),)

        return Tensor._result(np.sum(self.data, axis=axis, keepdims=keepdims), (a,), backward, "sum")

    def mean(self, axis: int | None = None, keepdims: bool = False) -> Tensor:
        count = self.size if axis is None else self.shape[axis]
        if count == 0:
            raise ShapeError(f"mean over an empty axis of {self.describe()}")
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, shape: Sequence[int]) -> Tensor:
        a = self
        target = tuple(shape)
        if int(np.prod(target, dtype=np.int64)) != a.size:
            raise ShapeError(f"reshape: cannot view {a.describe()} as {target}")

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g.reshape(a.shape),)

        return Tensor._result(self.data.reshape(target), (a,), backward, "reshape")

    def broadcast_to(self, shape: Sequence[int]) -> Tensor:
        a = self
        target = tuple(shape)
        if a.shape == target:
            return a
        try:
            values = np.broadcast_to(self.data, target)
        except ValueError as exc:
            raise ShapeError(f"broadcast_to: cannot expand {a.describe()} to {target}") from exc

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g.sum_to(a.shape),)

        return Tensor._result(values, (a,), backward, "broadcast_to")

    def sum_to(self, shape: Sequence[int]) -> Tensor:
        a = self
        target = tuple(shape)
        if a.shape == target:
            return a
        lead = a.ndim - len(target)
        if lead < 0:
            raise ShapeError(f"sum_to: cannot reduce {a.describe()} to {target}")
        axes = tuple(range(lead)) + tuple(
            lead + i for i, extent in enumerate(target) if extent == 1 and a.shape[lead + i] != 1
        )
        values = np.sum(self.data, axis=axes, keepdims=True)
        values = values.reshape(target)

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g.broadcast_to(a.shape),)

        return Tensor._result(values, (a,), backward, "sum_to")

    def slice(self, axis: int, start: int, stop: int) -> Tensor:
        a = self
        axis = axis % a.ndim
        index = [slice(None)] * a.ndim
        index[axis] = slice(start, stop)

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            pieces: list[Tensor] = []
            if start > 0:
                pieces.append(zeros(_with_extent(a.shape, axis, start)))
            pieces.append(g)
            if stop < a.shape[axis]:
                pieces.append(zeros(_with_extent(a.shape, axis, a.shape[axis] - stop)))
            return (concat(pieces, axis=axis),)

        return Tensor._result(self.data[tuple(index)], (a,), backward, "slice")

    # pointwise nonlinearities

    def exp(self) -> Tensor:
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g * out,)

        with np.errstate(over="ignore"):
            out = Tensor._result(np.exp(self.data), (a,), backward, "exp")
        return out

    def log(self) -> Tensor:
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g / a,)

        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.log(self.data)
        return Tensor._result(values, (a,), backward, "log")

    def sqrt(self) -> Tensor:
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g / (out * 2.0),)

        with np.errstate(invalid="ignore"):
            out = Tensor._result(np.sqrt(self.data), (a,), backward, "sqrt")
        return out

    def relu(self) -> Tensor:
        a = self
        gate = (self.data > 0).astype(np.float64)

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g * gate,)

        return Tensor._result(self.data * gate, (a,), backward, "relu")

    def leaky_relu(self, slope: float = 0.2) -> Tensor:
        a = self
        factor = np.where(self.data > 0, 1.0, slope)

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g * factor,)

        return Tensor._result(self.data * factor, (a,), backward, "leaky_relu")

    def sigmoid(self) -> Tensor:
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g * out * (1.0 - out),)

        out = Tensor._result(_stable_sigmoid(self.data), (a,), backward, "sigmoid")
        return out

    def tanh(self) -> Tensor:
        a = self

        def backward(g: Tensor) -> tuple[Tensor | None, ...]:
            return (g * (1.0 - out * out),)

        out = Tensor._result(np.tanh(self.data), (a,), backward, "tanh")
        return out


def lift(value: object) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def zeros(shape: Sequence[int]) -> Tensor:
    return Tensor(np.zeros(tuple(shape)))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = tuple(lift(t) for t in tensors)
    if not parts:
        raise ShapeError("concat requires at least one tensor")
    ndim = parts[0].ndim
    axis = axis % ndim
    for part in parts[1:]:
        if part.ndim != ndim or any(
            part.shape[i] != parts[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise ShapeError(f"concat: {part.describe()} does not match {parts[0].describe()} off axis {axis}")
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def backward(g: Tensor) -> tuple[Tensor | None, ...]:
        return tuple(g.slice(axis, int(bounds[i]), int(bounds[i + 1])) for i in range(len(parts)))

    return Tensor._result(np.concatenate([p.data for p in parts], axis=axis), parts, backward, "concat")


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError as exc:
        raise ShapeError(f"{op}: cannot broadcast {a.describe()} with {b.describe()}") from exc


def _kept_shape(shape: tuple[int, ...], axis: int | None) -> tuple[int, ...]:
    if axis is None:
        return tuple(1 for _ in shape)
    axis = axis % len(shape)
    return tuple(1 if i == axis else extent for i, extent in enumerate(shape))


def _with_extent(shape: tuple[int, ...], axis: int, extent: int) -> tuple[int, ...]:
    return tuple(extent if i == axis else s for i, s in enumerate(shape))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out
