from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from tests.helpers import tiny_config, tiny_tasks
from triad.contracts import ConsolidationKind, ExperimentConfig, ValidationError
from triad.core import ConfigParseError, UnknownDatasetError
from triad.data import (
    available_datasets,
    config_from_mapping,
    config_hash,
    data_dim,
    load_dataset,
    parse_config,
    write_config,
    write_labeled_vector_dir,
)


def test_empty_config_file_yields_defaults(tmp_path: Path) -> None:
    path = tmp_path / "empty.json"
    path.write_text("", encoding="utf-8")
    assert parse_config(path) == ExperimentConfig()


def test_negative_weight_is_reported() -> None:
    with pytest.raises(ValidationError) as ex:
        config_from_mapping({"lambda_c": -1})
    (issue,) = ex.value.issues
    assert issue.code == "NEGATIVE_WEIGHT"
    assert issue.field_path == "lambda_c"
    assert issue.message == "lambda_c must be ≥ 0"


def test_validator_collects_every_issue() -> None:
    with pytest.raises(ValidationError) as ex:
        config_from_mapping(
            {"mystery": 1, "batch_size": 0, "consolidation_c": "l2", "critic_hidden": []}
        )
    codes = sorted(issue.code for issue in ex.value.issues)
    assert codes == ["INVALID_CHOICE", "INVALID_COUNT", "INVALID_WIDTHS", "UNKNOWN_CONFIG_KEY"]


def test_config_round_trips_through_json(tmp_path: Path) -> None:
    config = tiny_config(consolidation_c=ConsolidationKind.SI, alignment_lambdas=(0.0, 5.0))
    path = write_config(config, tmp_path / "config.json")
    assert parse_config(path) == config
    assert path.read_bytes().endswith(b"}\n")
    assert config_hash(parse_config(path)) == config_hash(config)
    assert config_hash(tiny_config(seed=1)) != config_hash(config)


def test_malformed_config_reports_position(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text('{\n  "seed": 1,\n  oops\n}\n', encoding="utf-8")
    with pytest.raises(ConfigParseError) as ex:
        parse_config(path)
    assert ex.value.line == 3
    assert ex.value.column == 3


def test_gauss_dataset_splits_into_disjoint_tasks() -> None:
    config = tiny_config(num_tasks=None)
    tasks = load_dataset("gauss2d-10", config)
    assert [task.classes for task in tasks] == [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)]
    seen: set[int] = set()
    for task in tasks:
        labels = set(task.train().y.tolist())
        assert labels == set(task.classes)
        assert not labels & seen
        seen |= labels
    assert data_dim(tasks) == 2


def test_datasets_are_seeded() -> None:
    a = tiny_tasks(tiny_config(seed=3))[0].train()
    b = tiny_tasks(tiny_config(seed=3))[0].train()
    c = tiny_tasks(tiny_config(seed=4))[0].train()
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


def test_task_split_validation() -> None:
    with pytest.raises(ValidationError) as ex:
        load_dataset("gauss2d-10", tiny_config(classes_per_task=3, num_tasks=None))
    assert ex.value.issues[0].code == "NON_DIVISIBLE_TASKS"

    ragged = load_dataset("gauss2d-10", tiny_config(classes_per_task=3, num_tasks=None, allow_ragged=True))
    assert [len(task.classes) for task in ragged] == [3, 3, 3, 1]

    with pytest.raises(ValidationError) as ex:
        load_dataset("gauss2d-10", tiny_config(num_tasks=6))
    assert ex.value.issues[0].code == "TOO_MANY_TASKS"


def test_unknown_dataset_lists_alternatives() -> None:
    with pytest.raises(UnknownDatasetError) as ex:
        load_dataset("mnist-real", tiny_config())
    assert "gauss2d-10" in str(ex.value)
    assert "digits8x8" in available_datasets()


def test_digit_glyphs_stay_in_unit_range() -> None:
    tasks = load_dataset("digits8x8", tiny_config(train_per_class=3, test_per_class=2))
    sample = tasks[0].train()
    assert sample.x.shape == (6, 64)
    assert sample.x.min() >= 0.0 and sample.x.max() <= 1.0


def test_vector_directory_round_trip(tmp_path: Path) -> None:
    config = tiny_config()
    tasks = tiny_tasks(config)
    root = write_labeled_vector_dir(tasks, tmp_path / "vectors")
    assert (root / "manifest.json").exists()
    assert sorted(p.name for p in (root / "train").iterdir()) == ["0.csv", "1.csv", "2.csv", "3.csv"]

    reloaded = load_dataset(f"dir:{root}", config)
    assert [task.classes for task in reloaded] == [task.classes for task in tasks]
    for original, loaded in zip(tasks, reloaded):
        assert np.array_equal(original.train().x, loaded.train().x)
        assert np.array_equal(original.test().y, loaded.test().y)

    with pytest.raises(UnknownDatasetError):
        load_dataset(f"dir:{tmp_path / 'missing'}", config)


def test_shipped_configs_parse() -> None:
    configs = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))
    assert configs
    for path in configs:
        config = parse_config(path)
        assert config.dataset in available_datasets()
