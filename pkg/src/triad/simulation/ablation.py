from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from triad.contracts import AblationRow, ConsolidationKind, ExperimentConfig
from triad.core import seeded_random
from triad.data import data_dim, load_dataset
from triad.export import ablation_summary, write_ablation_csv, write_frame
from triad.persistence import AnalyticsStore
from triad.replay import TaskStream, TripleTrainer

logger = logging.getLogger(__name__)

# variant -> (consolidation on D', consolidation on C)
ABLATION_VARIANTS: dict[str, tuple[ConsolidationKind, ConsolidationKind]] = {
    "none": (ConsolidationKind.NONE, ConsolidationKind.NONE),
    "C-EWC": (ConsolidationKind.NONE, ConsolidationKind.EWC),
    "Dprime-EWC": (ConsolidationKind.EWC, ConsolidationKind.NONE),
    "both-EWC": (ConsolidationKind.EWC, ConsolidationKind.EWC),
    "C-SI": (ConsolidationKind.NONE, ConsolidationKind.SI),
    "both-SI": (ConsolidationKind.SI, ConsolidationKind.SI),
}


def variant_config(config: ExperimentConfig, variant: str, seed: int) -> ExperimentConfig:
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"unknown ablation variant '{variant}'; available: {', '.join(ABLATION_VARIANTS)}")
    dprime, classifier = ABLATION_VARIANTS[variant]
    return replace(config, seed=seed, consolidation_dprime=dprime, consolidation_c=classifier)


def run_variant(config: ExperimentConfig, variant: str, seed: int) -> AblationRow:
    cfg = variant_config(config, variant, seed)
    tasks = load_dataset(cfg.dataset, cfg)
    trainer = TripleTrainer(cfg, data_dim(tasks), seeded_random(cfg.seed))
    stream = TaskStream(tasks)
    for task in tasks:
        trainer.train_task(stream, task.task_id)
    final = trainer.metrics[-1]
    logger.info("ablation %s seed %d: A_final=%.2f", variant, seed, final.a_t)
    return AblationRow(variant, seed, final.a_t, final.acc_dprime, final.acc_c, final.acc_ensemble)


def run_ablation(
    config: ExperimentConfig,
    seeds: Sequence[int],
    variants: Sequence[str] | None = None,
) -> list[AblationRow]:
    chosen = list(variants) if variants is not None else list(ABLATION_VARIANTS)
    return [run_variant(config, variant, seed) for variant in chosen for seed in seeds]


def write_ablation_outputs(rows: Sequence[AblationRow], output_root: Path) -> list[Path]:
    """ablation.csv, ablation_summary.csv and the ablation mart."""
    outputs = [
        write_ablation_csv(rows, output_root / "ablation.csv"),
        write_frame(ablation_summary(rows), output_root / "ablation_summary.csv"),
    ]
    AnalyticsStore(output_root / "analytics.duckdb").record_ablation(rows)
    return outputs
