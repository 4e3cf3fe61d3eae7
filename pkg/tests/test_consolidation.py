from __future__ import annotations

from typing import Mapping

import numpy as np
import pytest

from tests.helpers import blob_data
from triad.autodiff import Tensor, grad, tanh
from triad.consolidation import (
    Anchor,
    EwcConsolidator,
    FisherMap,
    LossSpec,
    SIState,
    SiConsolidator,
    build_consolidator,
    consolidation_penalty,
    estimate_fisher,
    penalty_gradient,
    si_accumulate,
    si_finalize,
    snapshot,
)
from triad.contracts import ConsolidationKind, FisherCombine, ImportanceSource, LabeledVectors
from triad.core import ConsolidationError, seeded_random


def _square_loss(leaves: Mapping[str, Tensor], x: Tensor, y: np.ndarray) -> Tensor:
    return ((x * leaves["theta"] - y) ** 2).sum()


def _two_layer_loss(scale: float = 1.0) -> LossSpec:
    def loss(leaves: Mapping[str, Tensor], x: Tensor, y: np.ndarray) -> Tensor:
        hidden = tanh(x @ leaves["w"].T)
        return (((hidden @ leaves["out"].T).sum(axis=1) - y) ** 2).sum() * scale

    return loss


def _two_layer_params(seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {"w": rng.normal(size=(4, 3)), "out": rng.normal(size=(1, 4))}


def test_fisher_of_scalar_model() -> None:
    data = LabeledVectors(np.array([[2.0]]), np.array([0]))
    fisher = estimate_fisher({"theta": np.array([1.0])}, _square_loss, data)
    assert fisher.importance["theta"].tolist() == [64.0]
    assert fisher.source is ImportanceSource.CUSTOM


def test_fisher_is_zero_without_dependence() -> None:
    def constant(leaves: Mapping[str, Tensor], x: Tensor, y: np.ndarray) -> Tensor:
        return (x * 0.0).sum()

    fisher = estimate_fisher({"theta": np.array([1.0, 2.0])}, constant, blob_data(0, dim=1))
    assert fisher.importance["theta"].tolist() == [0.0, 0.0]


def test_fisher_ignores_duplication_and_scales_quadratically() -> None:
    params = _two_layer_params()
    data = blob_data(1, n=5)
    doubled = LabeledVectors(np.repeat(data.x, 2, axis=0), np.repeat(data.y, 2))

    base = estimate_fisher(params, _two_layer_loss(), data)
    repeated = estimate_fisher(params, _two_layer_loss(), doubled)
    scaled = estimate_fisher(params, _two_layer_loss(3.0), data)
    for name in params:
        assert np.allclose(base.importance[name], repeated.importance[name], rtol=1e-12)
        assert np.allclose(scaled.importance[name], 9.0 * base.importance[name], rtol=1e-9)


def test_fisher_excludes_output_layer_and_subsamples_deterministically() -> None:
    params = _two_layer_params()
    data = blob_data(2, n=20)
    first = estimate_fisher(params, _two_layer_loss(), data, 8, excluded=["out"], rng=seeded_random(3))
    second = estimate_fisher(params, _two_layer_loss(), data, 8, excluded=["out"], rng=seeded_random(3))

    assert first.excluded == frozenset({"out"})
    assert first.penalized() == ["w"]
    assert not np.any(first.importance["out"])
    assert np.array_equal(first.importance["w"], second.importance["w"])

    with pytest.raises(ConsolidationError):
        estimate_fisher(params, _two_layer_loss(), data, 8)
    with pytest.raises(ConsolidationError):
        estimate_fisher(params, _two_layer_loss(), LabeledVectors(np.zeros((0, 3)), np.zeros(0)))


def test_penalty_values() -> None:
    fisher = FisherMap({"w": np.array([1.0, 2.0])}, ImportanceSource.CUSTOM)
    anchor = Anchor({"w": np.array([0.0, 0.0])}, task=1)
    params = {"w": Tensor([0.5, -1.0])}
    assert consolidation_penalty(params, anchor, fisher, 2.0).item() == pytest.approx(4.5)
    assert consolidation_penalty(params, anchor, fisher, 0.0).item() == 0.0
    assert consolidation_penalty({"w": Tensor([0.0, 0.0])}, anchor, fisher, 2.0).item() == 0.0

    excluded = FisherMap({"w": np.zeros(2)}, ImportanceSource.CUSTOM, frozenset({"w"}))
    assert consolidation_penalty(params, anchor, excluded, 2.0).item() == 0.0

    with pytest.raises(ConsolidationError):
        consolidation_penalty(params, Anchor({}, task=1), fisher, 2.0)
    with pytest.raises(ConsolidationError):
        consolidation_penalty(params, anchor, fisher, -1.0)


def test_penalty_gradient_matches_autodiff() -> None:
    rng = np.random.default_rng(4)
    values = {"a": rng.normal(size=(3, 2)), "b": rng.normal(size=3)}
    importance = {name: rng.uniform(size=v.shape) for name, v in values.items()}
    fisher = FisherMap(importance, ImportanceSource.CUSTOM)
    anchor = Anchor({name: rng.normal(size=v.shape) for name, v in values.items()}, task=1)
    leaves = {name: Tensor(v, requires_grad=True) for name, v in values.items()}

    autodiff = grad(consolidation_penalty(leaves, anchor, fisher, 1.5), list(leaves.values()))
    closed = penalty_gradient(values, anchor, fisher, 1.5)
    for name, derived in zip(leaves, autodiff):
        assert np.allclose(derived.data, closed[name], rtol=0.0, atol=1e-8)


def test_snapshot_copies_parameters() -> None:
    live = {"w": np.array([1.0, 2.0])}
    anchor = snapshot(live, task=1)
    again = snapshot(live, task=1)
    live["w"][0] = 9.0
    assert anchor.values["w"].tolist() == [1.0, 2.0]
    assert np.array_equal(anchor.values["w"], again.values["w"])

    fisher = FisherMap({"w": np.ones(2)}, ImportanceSource.CUSTOM)
    assert consolidation_penalty({"w": Tensor([1.0, 2.0])}, anchor, fisher, 5.0).item() == 0.0


def test_si_path_contributions() -> None:
    si = SIState()
    si.begin_task({"w": np.array([1.0])})
    si_accumulate(si, {"w": np.array([1.0])}, {"w": np.array([1.0])}, {"w": np.array([3.0])})
    assert si.running["w"].tolist() == [0.0]

    si = SIState()
    si.begin_task({"w": np.array([0.0])})
    si_accumulate(si, {"w": np.array([0.0])}, {"w": np.array([0.1])}, {"w": np.array([-1.0])})
    assert si.running["w"][0] == pytest.approx(0.1)

    si = SIState(xi=0.1)
    si.begin_task({"w": np.array([1.0])})
    g = 2.0 * 1.0
    si_accumulate(si, {"w": np.array([1.0])}, {"w": np.array([1.0 - 0.1 * g])}, {"w": np.array([g])})
    assert si.running["w"][0] == pytest.approx(0.4)

    omega = si_finalize(si, {"w": np.array([0.8])})
    assert omega.source is ImportanceSource.PATH_INTEGRAL
    assert omega.importance["w"][0] == pytest.approx(0.4 / (0.04 + 0.1))
    assert si.running["w"].tolist() == [0.0]


def test_si_finalize_clips_negative_paths_and_excludes() -> None:
    si = SIState(xi=0.5)
    si.begin_task({"w": np.array([0.0]), "out": np.array([0.0])})
    si_accumulate(
        si,
        {"w": np.array([0.0]), "out": np.array([0.0])},
        {"w": np.array([1.0]), "out": np.array([1.0])},
        {"w": np.array([1.0]), "out": np.array([-1.0])},
    )
    omega = si_finalize(si, {"w": np.array([1.0]), "out": np.array([1.0])}, excluded=["out"])
    assert omega.importance["w"].tolist() == [0.0]
    assert omega.importance["out"].tolist() == [0.0]
    assert omega.excluded == frozenset({"out"})


def test_fisher_combine_modes() -> None:
    older = FisherMap({"w": np.array([1.0, 2.0])}, ImportanceSource.AUX_CE)
    newer = FisherMap({"w": np.array([0.5, 0.5])}, ImportanceSource.AUX_CE)
    assert older.combine(newer, FisherCombine.SUM).importance["w"].tolist() == [1.5, 2.5]
    assert older.combine(newer, FisherCombine.REPLACE).importance["w"].tolist() == [0.5, 0.5]
    with pytest.raises(ConsolidationError):
        FisherMap({"w": np.array([-1.0])}, ImportanceSource.CUSTOM)


def test_ewc_consolidator_accumulates_and_round_trips() -> None:
    consolidator = build_consolidator(ConsolidationKind.EWC, 2.0)
    assert isinstance(consolidator, EwcConsolidator)
    params = {"w": np.array([1.0, -1.0]), "out": np.array([0.3])}

    def estimate() -> FisherMap:
        return FisherMap(
            {"w": np.array([1.0, 3.0]), "out": np.zeros(1)}, ImportanceSource.AUX_CE, frozenset({"out"})
        )

    consolidator.end_task(params, 1, estimate, ["out"])
    consolidator.end_task(params, 2, estimate, ["out"])
    assert consolidator.fisher is not None
    assert consolidator.fisher.importance["w"].tolist() == [2.0, 6.0]
    assert consolidator.anchor is not None and consolidator.anchor.task == 2

    drifted = {"w": Tensor([2.0, -1.0]), "out": Tensor([5.0])}
    expected = consolidator.penalty(drifted).item()
    assert expected == pytest.approx(2.0 * 2.0 * 1.0)

    arrays, meta = consolidator.export_state()
    restored = build_consolidator(ConsolidationKind.EWC, 2.0)
    restored.restore_state(arrays, meta)
    assert restored.penalty(drifted).item() == expected


def test_si_consolidator_round_trips_running_state() -> None:
    consolidator = build_consolidator(ConsolidationKind.SI, 1.0, xi=0.1)
    assert isinstance(consolidator, SiConsolidator)
    consolidator.begin_task({"w": np.array([1.0])})
    consolidator.observe_step({"w": np.array([1.0])}, {"w": np.array([0.8])}, {"w": np.array([2.0])})

    arrays, meta = consolidator.export_state()
    restored = build_consolidator(ConsolidationKind.SI, 1.0)
    restored.restore_state(arrays, meta)
    assert isinstance(restored, SiConsolidator)
    assert restored.si.xi == 0.1
    assert restored.si.running["w"][0] == pytest.approx(0.4)

    restored.end_task({"w": np.array([0.8])}, 1, lambda: pytest.fail("SI needs no estimate"), [])
    assert restored.fisher is not None
    assert restored.fisher.importance["w"][0] == pytest.approx(0.4 / 0.14)


def test_null_consolidator_never_penalizes() -> None:
    consolidator = build_consolidator(ConsolidationKind.NONE, 100.0)
    consolidator.end_task({"w": np.ones(1)}, 1, lambda: pytest.fail("no estimate expected"), [])
    assert consolidator.penalty({"w": Tensor([50.0])}).item() == 0.0
