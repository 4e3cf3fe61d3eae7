from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Sequence

from triad.contracts import AblationRow, MetricsRow, SimilarityReport, TaskAccuracyRow

try:
    import duckdb
except ModuleNotFoundError:  # pragma: no cover
    duckdb = None  # type: ignore[assignment]

logger = logging.getLogger(__name__)

MART_TABLES = ("mart_task_metrics", "mart_task_accuracy", "mart_similarity", "mart_ablation")


class AnalyticsStore:
    def __init__(self, db_path: Path) -> None:
        self.db_path = db_path
        self.db_path.parent.mkdir(parents=True, exist_ok=True)

    def connect(self) -> Any:
        if duckdb is None:
            raise RuntimeError("duckdb is required for analytics store operations")
        return duckdb.connect(str(self.db_path))

    def initialize_schema(self) -> None:
        with self.connect() as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS mart_task_metrics (
                    run_id VARCHAR,
                    task INTEGER,
                    epoch INTEGER,
                    a_t DOUBLE,
                    acc_dprime DOUBLE,
                    acc_c DOUBLE,
                    acc_ensemble DOUBLE,
                    loss_d DOUBLE,
                    loss_dprime DOUBLE,
                    loss_c DOUBLE,
                    loss_g DOUBLE,
                    r_m DOUBLE,
                    PRIMARY KEY(run_id, task, epoch)
                );

                CREATE TABLE IF NOT EXISTS mart_task_accuracy (
                    run_id VARCHAR,
                    task INTEGER,
                    evaluated_task INTEGER,
                    acc_ensemble DOUBLE,
                    PRIMARY KEY(run_id, task, evaluated_task)
                );

                CREATE TABLE IF NOT EXISTS mart_similarity (
                    run_id VARCHAR,
                    experiment VARCHAR,
                    group_name VARCHAR,
                    lambda_c DOUBLE,
                    cosine DOUBLE,
                    correlation DOUBLE,
                    seed INTEGER
                );

                CREATE TABLE IF NOT EXISTS mart_ablation (
                    variant VARCHAR,
                    seed INTEGER,
                    a_final DOUBLE,
                    acc_dprime DOUBLE,
                    acc_c DOUBLE,
                    acc_ensemble DOUBLE,
                    PRIMARY KEY(variant, seed)
                );
                """
            )

    def record_training(
        self,
        run_id: str,
        metrics: Sequence[MetricsRow],
        task_metrics: Sequence[TaskAccuracyRow],
    ) -> None:
        self.initialize_schema()
        with self.connect() as conn:
            self._replace_run(
                conn,
                "mart_task_metrics",
                run_id,
                [
                    (
                        run_id,
                        r.task,
                        r.epoch,
                        r.a_t,
                        r.acc_dprime,
                        r.acc_c,
                        r.acc_ensemble,
                        r.loss_d,
                        r.loss_dprime,
                        r.loss_c,
                        r.loss_g,
                        r.r_m,
                    )
                    for r in metrics
                ],
            )
            self._replace_run(
                conn,
                "mart_task_accuracy",
                run_id,
                [(run_id, r.task, r.evaluated_task, r.acc_ensemble) for r in task_metrics],
            )
        logger.debug("analytics: %d metric rows recorded for %s", len(metrics), run_id)

    def record_similarity(self, run_id: str, experiment: str, reports: Sequence[SimilarityReport]) -> None:
        self.initialize_schema()
        rows = [
            (run_id, experiment, row.group, row.lambda_c, row.cosine, row.correlation, report.seed)
            for report in reports
            for row in report.rows
        ]
        with self.connect() as conn:
            conn.execute("DELETE FROM mart_similarity WHERE run_id = ? AND experiment = ?", [run_id, experiment])
            if rows:
                conn.executemany("INSERT INTO mart_similarity VALUES (?, ?, ?, ?, ?, ?, ?)", rows)

    def record_ablation(self, rows: Sequence[AblationRow]) -> None:
        self.initialize_schema()
        if not rows:
            return
        with self.connect() as conn:
            for row in rows:
                conn.execute("DELETE FROM mart_ablation WHERE variant = ? AND seed = ?", [row.variant, row.seed])
            conn.executemany(
                "INSERT INTO mart_ablation VALUES (?, ?, ?, ?, ?, ?)",
                [(r.variant, r.seed, r.a_final, r.acc_dprime, r.acc_c, r.acc_ensemble) for r in rows],
            )

    def row_count(self, table: str) -> int:
        if table not in MART_TABLES:
            raise ValueError(f"unknown mart '{table}'")
        with self.connect() as conn:
            return int(conn.execute(f"SELECT COUNT(*) FROM {table}").fetchone()[0])

    def _replace_run(self, conn: Any, table: str, run_id: str, rows: list[tuple]) -> None:
        conn.execute(f"DELETE FROM {table} WHERE run_id = ?", [run_id])
        if not rows:
            return
        values_placeholder = ",".join(["?"] * len(rows[0]))
        conn.executemany(f"INSERT INTO {table} VALUES ({values_placeholder})", rows)
