from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from triad.contracts import AblationRow, MetricsRow, SimilarityReport, TaskAccuracyRow

FLOAT_FORMAT = "%.6g"

METRICS_COLUMNS = [
    "task",
    "epoch",
    "A_t",
    "acc_Dprime",
    "acc_C",
    "acc_ensemble",
    "loss_D",
    "loss_Dprime",
    "loss_C",
    "loss_G",
    "R_M",
]
TASK_ACCURACY_COLUMNS = ["task", "evaluated_task", "acc_ensemble"]
SIMILARITY_COLUMNS = ["group", "lambda", "cosine", "correlation", "seed"]
ABLATION_COLUMNS = ["variant", "seed", "A_final", "acc_Dprime", "acc_C", "acc_ensemble"]
ABLATION_SUMMARY_COLUMNS = ["variant", "runs", "A_final_mean", "A_final_sem"]


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    """Comma-separated, header row, LF endings, 6 significant digits; written
    to a temp file and renamed into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_name(f"{path.name}.tmp")
    frame.to_csv(temp, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    os.replace(temp, path)
    return path


def metrics_frame(rows: Sequence[MetricsRow]) -> pd.DataFrame:
    records = [
        (r.task, r.epoch, r.a_t, r.acc_dprime, r.acc_c, r.acc_ensemble)
        + (r.loss_d, r.loss_dprime, r.loss_c, r.loss_g, r.r_m)
        for r in rows
    ]
    return pd.DataFrame(records, columns=METRICS_COLUMNS)


def write_metrics_csv(rows: Sequence[MetricsRow], path: Path) -> Path:
    return write_frame(metrics_frame(rows), path)


def write_task_accuracy_csv(rows: Sequence[TaskAccuracyRow], path: Path) -> Path:
    frame = pd.DataFrame([(r.task, r.evaluated_task, r.acc_ensemble) for r in rows], columns=TASK_ACCURACY_COLUMNS)
    return write_frame(frame, path)


def similarity_frame(reports: Sequence[SimilarityReport]) -> pd.DataFrame:
    # lambda stays empty for reports without a consolidation sweep
    records = [
        (row.group, np.nan if row.lambda_c is None else row.lambda_c, row.cosine, row.correlation, report.seed)
        for report in reports
        for row in report.rows
    ]
    return pd.DataFrame(records, columns=SIMILARITY_COLUMNS)


def write_similarity_csv(reports: Sequence[SimilarityReport], path: Path) -> Path:
    return write_frame(similarity_frame(reports), path)


def ablation_frame(rows: Sequence[AblationRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.variant, r.seed, r.a_final, r.acc_dprime, r.acc_c, r.acc_ensemble) for r in rows],
        columns=ABLATION_COLUMNS,
    )


def ablation_summary(rows: Sequence[AblationRow]) -> pd.DataFrame:
    """Mean and standard error of the final accuracy per variant, in first-seen order."""
    frame = ablation_frame(rows)
    grouped = frame.groupby("variant", sort=False)["A_final"]
    summary = pd.DataFrame(
        {
            "runs": grouped.count(),
            "A_final_mean": grouped.mean(),
            "A_final_sem": grouped.sem(ddof=1).fillna(0.0),
        }
    ).reset_index()
    return summary[ABLATION_SUMMARY_COLUMNS]


def write_ablation_csv(rows: Sequence[AblationRow], path: Path) -> Path:
    return write_frame(ablation_frame(rows), path)
