"""Multi-seed directional checks on the 5-task toy sequence.

These take minutes; run them with ``pytest -m slow``.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from triad.contracts import AblationRow, ExperimentConfig
from triad.data import load_dataset
from triad.diagnostics import joint_head_interference_experiment, replay_alignment_experiment
from triad.simulation import run_variant

SEEDS = range(10)
VARIANTS = ("none", "C-EWC", "Dprime-EWC", "both-EWC", "both-SI")

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def grid() -> dict[str, list[AblationRow]]:
    config = ExperimentConfig()
    return {variant: [run_variant(config, variant, seed) for seed in SEEDS] for variant in VARIANTS}


def _finals(rows: list[AblationRow]) -> np.ndarray:
    return np.array([row.a_final for row in rows])


def test_dual_consolidation_beats_single_beats_none(grid):
    both = _finals(grid["both-EWC"])
    one = (_finals(grid["C-EWC"]) + _finals(grid["Dprime-EWC"])) / 2.0
    none = _finals(grid["none"])
    ordered = (both > one) & (one > none)
    assert int(ordered.sum()) >= 7
    assert float(np.mean(both - none)) >= 2.0


def test_ensemble_tracks_the_better_network(grid):
    rows = [row for variant in VARIANTS for row in grid[variant]]
    for row in rows:
        assert row.acc_ensemble >= max(row.acc_dprime, row.acc_c) - 0.5
    dominant = sum(row.acc_ensemble >= max(row.acc_dprime, row.acc_c) for row in rows)
    assert dominant > len(rows) / 2


def test_si_and_ewc_are_interchangeable(grid):
    si = float(np.mean(_finals(grid["both-SI"])))
    ewc = float(np.mean(_finals(grid["both-EWC"])))
    assert abs(si - ewc) <= 3.0


def test_consolidation_aligns_real_and_generated_importance():
    wins = 0
    for seed in SEEDS:
        config = ExperimentConfig(seed=seed, num_tasks=1, alignment_lambdas=(0.0, 100.0))
        low, high = replay_alignment_experiment(config, load_dataset(config.dataset, config))
        wins += high.mean_cosine() - low.mean_cosine() >= 0.05
    assert wins >= 7


def test_joint_head_interference_grows_with_depth():
    hits = 0
    for seed in SEEDS:
        config = replace(ExperimentConfig(), seed=seed, critic_hidden=(64, 64, 64))
        report = joint_head_interference_experiment(config, load_dataset(config.dataset, config))
        shallow = report.rows[0].cosine
        hits += any(row.cosine < shallow for row in report.rows[1:])
    assert hits >= 6
