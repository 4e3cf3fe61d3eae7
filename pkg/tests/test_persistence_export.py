from __future__ import annotations

import sqlite3
from pathlib import Path

import duckdb
import numpy as np
import pytest

from triad.contracts import AblationRow, MetricsRow, SimilarityReport, SimilarityRow, TaskAccuracyRow
from triad.core import CheckpointCorruptionError, CheckpointVersionError
from triad.export import (
    METRICS_COLUMNS,
    ExportService,
    ablation_summary,
    similarity_frame,
    write_metrics_csv,
)
from triad.persistence import AnalyticsStore, Checkpoint, load_checkpoint, save_checkpoint


def _checkpoint() -> Checkpoint:
    rng = np.random.default_rng(0)
    return Checkpoint(
        config_hash="abc123",
        seed=7,
        task=2,
        epoch=3,
        arrays={
            "critic/trunk.fc0.weight": rng.normal(size=(4, 2)),
            "critic/aux_head.weight": np.zeros((0, 4)),
            "replay/1/y": np.array([0, 1, 0], dtype=np.int32),
        },
        state={"trainer": {"t": 2, "task_open": True}, "released": [1]},
        config={"seed": 7, "dataset": "gauss2d-10"},
    )


def _metrics(task: int) -> list[MetricsRow]:
    return [MetricsRow(task, epoch, 50.0, 40.0, 45.0, 50.0, 0.1, 0.2, 0.3, 0.4, 0.05) for epoch in (1, 2)]


def test_checkpoint_round_trip_is_exact(tmp_path: Path):
    original = _checkpoint()
    path = save_checkpoint(tmp_path / "ckpt" / "task02.ckpt", original)
    assert not path.with_name("task02.ckpt.tmp").exists()

    loaded = load_checkpoint(path)
    assert (loaded.config_hash, loaded.seed, loaded.task, loaded.epoch) == ("abc123", 7, 2, 3)
    assert loaded.state == original.state
    assert loaded.config == original.config
    assert sorted(loaded.arrays) == sorted(original.arrays)
    assert np.array_equal(loaded.arrays["critic/trunk.fc0.weight"], original.arrays["critic/trunk.fc0.weight"])
    assert loaded.arrays["critic/aux_head.weight"].shape == (0, 4)
    assert loaded.arrays["replay/1/y"].dtype == np.int64
    assert loaded.arrays["replay/1/y"].tolist() == [0, 1, 0]


def test_truncated_or_garbage_checkpoint_is_corrupt(tmp_path: Path):
    path = save_checkpoint(tmp_path / "task01.ckpt", _checkpoint())
    payload = path.read_bytes()
    path.write_bytes(payload[: len(payload) // 2])
    with pytest.raises(CheckpointCorruptionError):
        load_checkpoint(path)

    garbage = tmp_path / "garbage.ckpt"
    garbage.write_bytes(b"not a checkpoint at all" * 64)
    with pytest.raises(CheckpointCorruptionError):
        load_checkpoint(garbage)

    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_checkpoint_version_mismatch(tmp_path: Path):
    path = save_checkpoint(tmp_path / "task01.ckpt", _checkpoint())
    with sqlite3.connect(path) as conn:
        conn.execute("UPDATE checkpoint_meta SET value = '2' WHERE key = 'format_version'")
    with pytest.raises(CheckpointVersionError) as ex:
        load_checkpoint(path)
    assert ex.value.found == 2
    assert ex.value.expected == 1


def test_tampered_checkpoint_fails_digest(tmp_path: Path):
    path = save_checkpoint(tmp_path / "task01.ckpt", _checkpoint())
    with sqlite3.connect(path) as conn:
        conn.execute("UPDATE checkpoint_json SET payload = '{}' WHERE name = 'state'")
    with pytest.raises(CheckpointCorruptionError):
        load_checkpoint(path)


def test_analytics_marts_replace_rows_per_run(tmp_path: Path):
    store = AnalyticsStore(tmp_path / "analytics.duckdb")
    tasks = [TaskAccuracyRow(1, 1, 90.0)]
    store.record_training("run_a", _metrics(1), tasks)
    store.record_training("run_a", _metrics(1), tasks)
    store.record_training("run_b", _metrics(1) + _metrics(2), tasks)
    assert store.row_count("mart_task_metrics") == 2 + 4
    assert store.row_count("mart_task_accuracy") == 2

    report = SimilarityReport([SimilarityRow("fc0", 0.9, 0.8, 10.0)], seed=0, dataset_ids=("real", "generated"))
    store.record_similarity("run_a", "alignment", [report])
    store.record_similarity("run_a", "alignment", [report])
    store.record_ablation([AblationRow("none", 0, 30.0, 20.0, 25.0, 30.0)])
    store.record_ablation([AblationRow("none", 0, 31.0, 20.0, 25.0, 31.0)])
    assert store.row_count("mart_similarity") == 1
    assert store.row_count("mart_ablation") == 1
    with pytest.raises(ValueError):
        store.row_count("games")


def test_export_csv_parquet_row_count_parity(tmp_path: Path):
    db_path = tmp_path / "analytics.duckdb"
    store = AnalyticsStore(db_path)
    store.record_training("run_a", _metrics(1) + _metrics(2), [TaskAccuracyRow(2, 1, 80.0), TaskAccuracyRow(2, 2, 70.0)])
    store.record_ablation([AblationRow("both-EWC", seed, 60.0 + seed, 50.0, 55.0, 60.0) for seed in range(3)])

    outputs = ExportService(db_path).export_required_datasets(tmp_path / "exports")
    csv_files = [p for p in outputs if p.suffix == ".csv"]
    parquet_files = [p for p in outputs if p.suffix == ".parquet"]
    assert len(csv_files) == len(parquet_files) == 4

    with duckdb.connect() as conn:
        for csv_path in csv_files:
            parquet_path = csv_path.with_suffix(".parquet")
            csv_row = conn.execute(f"SELECT COUNT(*) FROM read_csv_auto('{csv_path.as_posix()}')").fetchone()
            parquet_row = conn.execute(f"SELECT COUNT(*) FROM parquet_scan('{parquet_path.as_posix()}')").fetchone()
            assert csv_row is not None
            assert parquet_row is not None
            assert csv_row[0] == parquet_row[0]

    with pytest.raises(FileNotFoundError):
        ExportService(tmp_path / "missing.duckdb").export_required_datasets(tmp_path / "none")


def test_metrics_csv_format(tmp_path: Path):
    path = write_metrics_csv(_metrics(1), tmp_path / "metrics.csv")
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert lines[1] == "1,1,50,40,45,50,0.1,0.2,0.3,0.4,0.05"
    assert len(lines) == 3


def test_similarity_frame_leaves_lambda_empty_without_sweep():
    report = SimilarityReport([SimilarityRow("trunk.fc0", 0.5, 0.25)], seed=3, dataset_ids=("critic", "aux"))
    frame = similarity_frame([report])
    assert list(frame.columns) == ["group", "lambda", "cosine", "correlation", "seed"]
    assert frame["lambda"].isna().all()
    assert frame.loc[0, "seed"] == 3


def test_ablation_summary_keeps_variant_order():
    rows = [
        AblationRow("none", 0, 20.0, 0.0, 0.0, 20.0),
        AblationRow("C-EWC", 0, 40.0, 0.0, 0.0, 40.0),
        AblationRow("none", 1, 30.0, 0.0, 0.0, 30.0),
        AblationRow("C-EWC", 1, 40.0, 0.0, 0.0, 40.0),
    ]
    summary = ablation_summary(rows)
    assert summary["variant"].tolist() == ["none", "C-EWC"]
    assert summary["runs"].tolist() == [2, 2]
    assert summary["A_final_mean"].tolist() == [25.0, 40.0]
    assert summary.loc[0, "A_final_sem"] == pytest.approx(5.0)
    assert summary.loc[1, "A_final_sem"] == 0.0
