from __future__ import annotations

from typing import Callable, Mapping

import numpy as np
import pytest

from tests.helpers import finite_difference, relative_error, smooth_finite_difference
from triad.autodiff import (
    GradientMap,
    Graph,
    OptimizerState,
    Tensor,
    apply_gate,
    backward,
    cross_entropy,
    dense,
    forward_eval,
    grad,
    grad_norm,
    leaky_relu,
    optimizer_step,
    relu,
    tanh,
)
from triad.consolidation import Anchor, FisherMap, consolidation_penalty
from triad.contracts import ImportanceSource, OptimizerKind
from triad.core import GateError, GraphStateError, NonFiniteError, ShapeError
from triad.networks import MaskSet, generator_graph, mask_sparsity_penalty
from triad.replay import (
    aux_classifier_loss,
    classifier_importance_loss,
    classifier_loss,
    critic_loss,
    generator_loss,
    penalty_points,
)


def _mlp(seed: int) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    params = {
        "w1": rng.normal(size=(4, 3)),
        "b1": rng.normal(size=(4,)),
        "w2": rng.normal(size=(3, 4)),
        "b2": rng.normal(size=(3,)),
    }
    x = rng.normal(size=(5, 3))
    y = rng.integers(0, 3, size=5)
    return params, x, y


def _mlp_graph(x: np.ndarray, y: np.ndarray) -> Graph:
    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        hidden = tanh(dense(Tensor(x), leaves["w1"], leaves["b1"]))
        logits = dense(hidden, leaves["w2"], leaves["b2"])
        return {"loss": cross_entropy(logits, y)}

    names = ("w1", "b1", "w2", "b2")
    return Graph(build, names, trainable=names, name="mlp")


def _penalty_graph(x: np.ndarray) -> Graph:
    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        inputs = Tensor(x, requires_grad=True)
        score = tanh(dense(inputs, leaves["w"], leaves["b"])).sum(axis=1)
        return {"loss": ((grad_norm(score, inputs) - 1.0) ** 2).mean()}

    return Graph(build, ("w", "b"), trainable=("w", "b"), name="penalty")


def test_identity_and_dense_forward() -> None:
    identity = Graph(lambda leaves: {"y": leaves["x"]}, ("x",))
    assert forward_eval(identity, {"x": np.array([1.0, 2.0])})["y"].data.tolist() == [1.0, 2.0]

    layer = Graph(
        lambda leaves: {"y": dense(leaves["x"], leaves["w"], leaves["b"])},
        ("x", "w", "b"),
    )
    out = forward_eval(layer, {"x": np.array([[3.0, 4.0]]), "w": np.eye(2), "b": np.zeros(2)})
    assert out["y"].data.tolist() == [[3.0, 4.0]]

    rectifier = Graph(lambda leaves: {"y": relu(leaves["x"])}, ("x",))
    assert forward_eval(rectifier, {"x": np.array([-2.0])})["y"].data.tolist() == [0.0]


def test_square_gradient_and_constant_gradient() -> None:
    square = Graph(lambda leaves: {"loss": leaves["t"] ** 2}, ("t",), trainable=("t",))
    out = forward_eval(square, {"t": np.array(3.0)})
    assert backward(square, out["loss"])["t"].item() == pytest.approx(6.0)

    constant = Graph(lambda leaves: {"loss": Tensor(5.0)}, ("t",), trainable=("t",))
    out = forward_eval(constant, {"t": np.array(3.0)})
    assert backward(constant, out["loss"])["t"].item() == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_backward_matches_finite_differences(seed: int) -> None:
    params, x, y = _mlp(seed)
    graph = _mlp_graph(x, y)
    grads = backward(graph, forward_eval(graph, params)["loss"])

    for name in params:

        def loss_at(theta: np.ndarray, name: str = name) -> float:
            return forward_eval(graph, {**params, name: theta})["loss"].item()

        numeric = finite_difference(loss_at, params[name])
        assert relative_error(grads[name].data, numeric) < 1e-4


def test_gradient_penalty_double_backward_matches_finite_differences() -> None:
    rng = np.random.default_rng(7)
    params = {"w": rng.normal(size=(2, 3)), "b": rng.normal(size=(2,))}
    graph = _penalty_graph(rng.normal(size=(4, 3)))
    grads = backward(graph, forward_eval(graph, params)["loss"])

    for name in params:

        def loss_at(theta: np.ndarray, name: str = name) -> float:
            return forward_eval(graph, {**params, name: theta})["loss"].item()

        assert relative_error(grads[name].data, finite_difference(loss_at, params[name])) < 1e-4


LossCase = tuple[dict[str, np.ndarray], Callable[[Mapping[str, Tensor]], dict[str, Tensor]]]


def _dense_params(rng: np.random.Generator, prefix: str, fan_in: int, fan_out: int) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.weight": rng.normal(size=(fan_out, fan_in)),
        f"{prefix}.bias": rng.normal(size=(fan_out,)),
    }


def _critic_params(rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        **_dense_params(rng, "trunk.fc0", 2, 3),
        **_dense_params(rng, "critic_head", 3, 1),
        **_dense_params(rng, "aux_head", 3, 2),
    }


def _classifier_params(rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {**_dense_params(rng, "fc0", 2, 3), **_dense_params(rng, "out", 3, 2)}


def _importance(rng: np.random.Generator, params: Mapping[str, np.ndarray]) -> tuple[Anchor, FisherMap]:
    drifted = {name: values + rng.normal(scale=0.3, size=values.shape) for name, values in params.items()}
    anchor = Anchor(drifted, 1)
    fisher = FisherMap(
        {name: rng.uniform(0.0, 1.0, size=values.shape) for name, values in params.items()},
        ImportanceSource.CUSTOM,
    )
    return anchor, fisher


def _critic_case(rng: np.random.Generator) -> LossCase:
    params = _critic_params(rng)
    real, fake = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    epsilon = rng.uniform(size=3)

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        x_hat = penalty_points(real, fake, epsilon)
        return {"loss": critic_loss(leaves, Tensor(real), Tensor(fake), x_hat, 1, 10.0).total}

    return params, build


def _aux_case(rng: np.random.Generator) -> LossCase:
    params = _critic_params(rng)
    anchor, fisher = _importance(rng, params)
    x, labels = rng.normal(size=(3, 2)), rng.integers(0, 2, size=3)

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        penalty = consolidation_penalty(leaves, anchor, fisher, 2.0)
        return {"loss": aux_classifier_loss(leaves, Tensor(x), labels, 1, penalty)[0]}

    return params, build


def _distillation_case(rng: np.random.Generator) -> LossCase:
    params = _classifier_params(rng)
    anchor, fisher = _importance(rng, params)
    x, targets = rng.normal(size=(3, 2)), rng.dirichlet(np.ones(2), size=3)

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        penalty = consolidation_penalty(leaves, anchor, fisher, 2.0)
        return {"loss": classifier_loss(leaves, Tensor(x), targets, 1, penalty)[0]}

    return params, build


def _classifier_importance_case(rng: np.random.Generator) -> LossCase:
    params = _classifier_params(rng)
    anchor, fisher = _importance(rng, params)
    x, labels = rng.normal(size=(3, 2)), rng.integers(0, 2, size=3)
    targets = rng.dirichlet(np.ones(2), size=3)

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        penalty = consolidation_penalty(leaves, anchor, fisher, 0.5)
        return {"loss": classifier_importance_loss(leaves, Tensor(x), labels, targets, 1, penalty)}

    return params, build


def _generator_case(rng: np.random.Generator) -> LossCase:
    params = {
        "embedding": rng.normal(size=(2, 2)),
        **_dense_params(rng, "fc0", 4, 3),
        **_dense_params(rng, "out", 3, 2),
        "mask0": rng.normal(size=3),
    }
    critic = {name: Tensor(values) for name, values in _critic_params(rng).items()}
    masks = MaskSet(widths=(3,))
    prior = [rng.uniform(size=3)]
    z, labels = rng.normal(size=(3, 2)), rng.integers(0, 2, size=3)

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        mask = masks.mask_tensor(leaves["mask0"], scale=2.0)
        fake = generator_graph(leaves, Tensor(z), labels, [mask])
        sparsity = mask_sparsity_penalty([mask], prior)
        return {"loss": generator_loss(critic, fake, labels, 1, sparsity, 0.5)[0]}

    return params, build


def _sparsity_case(rng: np.random.Generator) -> LossCase:
    params = {"mask0": rng.normal(size=4), "mask1": rng.normal(size=3)}
    masks = MaskSet(widths=(4, 3))
    prior = [rng.uniform(size=4), rng.uniform(size=3)]

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        current = [masks.mask_tensor(leaves[name], scale=3.0) for name in ("mask0", "mask1")]
        return {"loss": mask_sparsity_penalty(current, prior)}

    return params, build


def _consolidation_case(rng: np.random.Generator) -> LossCase:
    params = _classifier_params(rng)
    anchor, fisher = _importance(rng, params)

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        return {"loss": consolidation_penalty(leaves, anchor, fisher, 3.0)}

    return params, build


LOSS_CASES: dict[str, Callable[[np.random.Generator], LossCase]] = {
    "critic": _critic_case,
    "aux_classifier": _aux_case,
    "distillation": _distillation_case,
    "classifier_importance": _classifier_importance_case,
    "generator": _generator_case,
    "mask_sparsity": _sparsity_case,
    "consolidation": _consolidation_case,
}


@pytest.mark.parametrize("seed", range(100))
@pytest.mark.parametrize("case", sorted(LOSS_CASES))
def test_loss_gradients_match_finite_differences(case: str, seed: int) -> None:
    params, build = LOSS_CASES[case](np.random.default_rng(seed))
    graph = Graph(build, tuple(params), trainable=tuple(params), name=case)
    grads = backward(graph, forward_eval(graph, params)["loss"])

    checked = total = 0
    for name in params:

        def loss_at(theta: np.ndarray, name: str = name) -> float:
            return forward_eval(graph, {**params, name: theta})["loss"].item()

        numeric, smooth = smooth_finite_difference(loss_at, params[name])
        total += smooth.size
        checked += int(smooth.sum())
        if smooth.any():
            assert relative_error(grads[name].data[smooth], numeric[smooth]) < 1e-4, name
    assert checked > total // 2


def test_squared_gradient_of_square_is_eight_x() -> None:
    x = Tensor(np.array([-1.5, 0.0, 0.25, 3.0]), requires_grad=True)
    (first,) = grad((x**2).sum(), [x], create_graph=True)
    assert np.allclose(first.data, 2.0 * x.data, rtol=1e-12, atol=0.0)
    (second,) = grad((first * first).sum(), [x])
    assert np.allclose(second.data, 8.0 * x.data, rtol=1e-12, atol=0.0)


@pytest.mark.parametrize("seed", range(20))
def test_backward_is_linear_in_the_loss(seed: int) -> None:
    rng = np.random.default_rng(seed)
    params, x, y = _mlp(seed)
    a, b = rng.normal(size=2)

    def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
        hidden = leaky_relu(dense(Tensor(x), leaves["w1"], leaves["b1"]))
        logits = dense(hidden, leaves["w2"], leaves["b2"])
        f = cross_entropy(logits, y)
        g = (tanh(logits) ** 2).mean()
        return {"f": f, "g": g, "combined": f * a + g * b}

    names = tuple(params)
    graph = Graph(build, names, trainable=names, name="linearity")
    outputs = forward_eval(graph, params)
    df = backward(graph, outputs["f"])
    dg = backward(graph, outputs["g"])
    combined = backward(graph, outputs["combined"])
    for name in names:
        expected = a * df[name].data + b * dg[name].data
        assert np.allclose(combined[name].data, expected, rtol=1e-10, atol=1e-12)


def test_tensor_data_is_read_only() -> None:
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 5.0


def test_graph_errors() -> None:
    layer = Graph(
        lambda leaves: {"y": dense(leaves["x"], leaves["w"], leaves["b"])},
        ("x", "w", "b"),
        trainable=("w",),
    )
    with pytest.raises(ShapeError):
        forward_eval(layer, {"x": np.ones((1, 3)), "w": np.eye(2), "b": np.zeros(2)})
    with pytest.raises(GraphStateError):
        backward(layer, Tensor(0.0))
    with pytest.raises(GraphStateError):
        forward_eval(layer, {"x": np.ones((1, 2))})

    identity = Graph(lambda leaves: {"y": leaves["x"] * 2.0}, ("x",))
    with pytest.raises(NonFiniteError):
        forward_eval(identity, {"x": np.array([1.0, np.inf])})


def test_gate_scales_gradients() -> None:
    grads = GradientMap({"w": Tensor([1.0, 2.0])})
    assert apply_gate(grads, {"w": np.array([0.0, 1.0])})["w"].data.tolist() == [0.0, 2.0]
    assert apply_gate(grads, {"w": np.ones(2)})["w"].data.tolist() == [1.0, 2.0]

    with pytest.raises(GateError):
        apply_gate(grads, {"w": np.array([0.5, 1.5])})
    with pytest.raises(GateError):
        apply_gate(grads, {"w": np.ones(3)})
    with pytest.raises(GateError):
        apply_gate(grads, {"v": np.ones(2)})


def test_zero_gate_leaves_adam_state_untouched() -> None:
    theta = np.array([0.3, -0.7])
    state = OptimizerState(OptimizerKind.ADAM, learning_rate=0.1)
    warmup = optimizer_step({"w": theta}, GradientMap({"w": Tensor([0.5, 0.5])}), state)
    moment = state.first_moment["w"].copy()

    gated = apply_gate(GradientMap({"w": Tensor([4.0, -2.0])}), {"w": np.array([0.0, 1.0])})
    updated = optimizer_step(warmup, gated, state)

    assert updated["w"][0] == warmup["w"][0]
    assert updated["w"][1] != warmup["w"][1]
    assert state.first_moment["w"][0] == moment[0]

    frozen = apply_gate(GradientMap({"w": Tensor([4.0, -2.0])}), {"w": np.zeros(2)})
    assert np.array_equal(optimizer_step(updated, frozen, state)["w"], updated["w"])


def test_sgd_step() -> None:
    state = OptimizerState(OptimizerKind.SGD, learning_rate=0.1)
    stepped = optimizer_step({"w": np.array([1.0])}, GradientMap({"w": Tensor([2.0])}), state)
    assert stepped["w"][0] == pytest.approx(0.8)
    still = optimizer_step({"w": np.array([1.0])}, GradientMap({"w": Tensor([0.0])}), state)
    assert still["w"][0] == 1.0


def test_adam_converges_on_quadratic() -> None:
    state = OptimizerState(OptimizerKind.ADAM, learning_rate=0.1)
    params = {"w": np.array([0.0])}
    for _ in range(300):
        params = optimizer_step(params, GradientMap({"w": Tensor(2.0 * (params["w"] - 5.0))}), state)
    assert abs(params["w"][0] - 5.0) < 0.5


def test_optimizer_rejects_non_finite_and_mismatched_gradients() -> None:
    state = OptimizerState(OptimizerKind.SGD, learning_rate=0.1)
    with pytest.raises(NonFiniteError):
        optimizer_step({"w": np.zeros(1)}, GradientMap({"w": Tensor([np.nan])}), state)
    with pytest.raises(ShapeError):
        optimizer_step({"w": np.zeros(2)}, GradientMap({"w": Tensor([1.0])}), state)
