from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from triad.contracts import ExperimentConfig, SimilarityReport, TaskDataset
from triad.core import run_id
from triad.data import config_hash
from triad.diagnostics import joint_head_interference_experiment, replay_alignment_experiment
from triad.export import write_similarity_csv
from triad.persistence import AnalyticsStore
from triad.simulation.runtime import RuntimePaths, resolve_output_root, write_manifest

logger = logging.getLogger(__name__)


def _paths(config: ExperimentConfig, output_root: str | Path | None) -> tuple[RuntimePaths, str]:
    digest = config_hash(config)
    paths = RuntimePaths(resolve_output_root(output_root), run_id(digest, config.seed))
    write_manifest(paths.manifest_path, config, digest, paths.run_id)
    return paths, digest


def run_alignment_diagnostic(
    config: ExperimentConfig,
    output_root: str | Path | None = None,
    *,
    lambdas: Sequence[float] | None = None,
    tasks: Sequence[TaskDataset] | None = None,
) -> tuple[list[SimilarityReport], Path]:
    """λ_C sweep of real-vs-generated importance alignment; writes similarity.csv."""
    if lambdas is not None:
        config = replace(config, alignment_lambdas=tuple(float(v) for v in lambdas))
    paths, _ = _paths(config, output_root)
    reports = replay_alignment_experiment(config, tasks)
    path = write_similarity_csv(reports, paths.similarity_path)
    AnalyticsStore(paths.duckdb_path).record_similarity(paths.run_id, "alignment", reports)
    logger.info("alignment sweep over %d λ values written to %s", len(reports), path)
    return reports, path


def run_joint_head_diagnostic(
    config: ExperimentConfig,
    output_root: str | Path | None = None,
    *,
    tasks: Sequence[TaskDataset] | None = None,
) -> tuple[SimilarityReport, Path]:
    paths, _ = _paths(config, output_root)
    report = joint_head_interference_experiment(config, tasks)
    path = write_similarity_csv([report], paths.joint_head_path)
    AnalyticsStore(paths.duckdb_path).record_similarity(paths.run_id, "joint_head", [report])
    return report, path
