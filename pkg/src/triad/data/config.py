from __future__ import annotations

import json
import logging
from dataclasses import asdict, fields
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from triad.contracts import (
    ConsolidationKind,
    ExperimentConfig,
    FisherCombine,
    GpMode,
    OptimizerKind,
    ValidationError,
    ValidationIssue,
    ValidationResult,
)
from triad.core import ConfigParseError, canonical_json, digest_of

logger = logging.getLogger(__name__)

ENUM_KEYS: dict[str, type[Enum]] = {
    "consolidation_dprime": ConsolidationKind,
    "consolidation_c": ConsolidationKind,
    "fisher_combine": FisherCombine,
    "gp_mode": GpMode,
    "optimizer": OptimizerKind,
}
NONNEGATIVE_KEYS = ("lambda_gp", "lambda_dprime", "lambda_c", "lambda_g")
POSITIVE_INT_KEYS = (
    "classes_per_task",
    "train_per_class",
    "test_per_class",
    "fisher_samples",
    "n_critic",
    "epochs_per_task",
    "batch_size",
    "latent_dim",
    "label_embedding_dim",
    "alignment_real_epochs",
    "alignment_generated_epochs",
    "probe_task",
)
OPTIONAL_POSITIVE_INT_KEYS = ("num_tasks", "replay_size")
POSITIVE_FLOAT_KEYS = ("si_xi", "mask_scale_max", "learning_rate", "adam_eps")
UNIT_INTERVAL_KEYS = ("adam_beta1", "adam_beta2")
BOOL_KEYS = ("allow_ragged", "resample_replay", "mask_binarize", "checkpoint_every_epoch")
WIDTH_KEYS = ("generator_hidden", "critic_hidden", "classifier_hidden")
TUPLE_FLOAT_KEYS = ("alignment_lambdas",)

CONFIG_KEYS = frozenset(f.name for f in fields(ExperimentConfig))


class ConfigValidator:
    """Collects every problem in a raw config mapping before anything is built."""

    def validate(self, payload: Mapping[str, Any], source: str = "<config>") -> ValidationResult:
        issues: list[ValidationIssue] = []

        def fail(code: str, key: str, message: str) -> None:
            issues.append(ValidationIssue(code, "blocking", key, source, message))

        for key in sorted(set(payload) - CONFIG_KEYS):
            fail("UNKNOWN_CONFIG_KEY", key, f"unknown key '{key}'")
        for key, enum_type in ENUM_KEYS.items():
            if key in payload and payload[key] not in {member.value for member in enum_type}:
                allowed = ", ".join(member.value for member in enum_type)
                fail("INVALID_CHOICE", key, f"{key} must be one of {allowed}")
        for key in NONNEGATIVE_KEYS:
            if key in payload and not (_is_number(payload[key]) and payload[key] >= 0):
                fail("NEGATIVE_WEIGHT", key, f"{key} must be ≥ 0")
        for key in POSITIVE_INT_KEYS:
            if key in payload and not (_is_int(payload[key]) and payload[key] >= 1):
                fail("INVALID_COUNT", key, f"{key} must be an integer ≥ 1")
        for key in OPTIONAL_POSITIVE_INT_KEYS:
            value = payload.get(key)
            if value is not None and not (_is_int(value) and value >= 1):
                fail("INVALID_COUNT", key, f"{key} must be null or an integer ≥ 1")
        for key in POSITIVE_FLOAT_KEYS:
            if key in payload and not (_is_number(payload[key]) and payload[key] > 0):
                fail("INVALID_RANGE", key, f"{key} must be > 0")
        for key in UNIT_INTERVAL_KEYS:
            if key in payload and not (_is_number(payload[key]) and 0 <= payload[key] < 1):
                fail("INVALID_RANGE", key, f"{key} must lie in [0, 1)")
        for key in BOOL_KEYS:
            if key in payload and not isinstance(payload[key], bool):
                fail("INVALID_TYPE", key, f"{key} must be true or false")
        for key in WIDTH_KEYS:
            value = payload.get(key)
            if value is not None and not (
                isinstance(value, list) and value and all(_is_int(w) and w >= 1 for w in value)
            ):
                fail("INVALID_WIDTHS", key, f"{key} must be a non-empty list of integers ≥ 1")
        for key in TUPLE_FLOAT_KEYS:
            value = payload.get(key)
            if value is not None and not (
                isinstance(value, list) and value and all(_is_number(v) and v >= 0 for v in value)
            ):
                fail("INVALID_SWEEP", key, f"{key} must be a non-empty list of values ≥ 0")
        if "seed" in payload and not _is_int(payload["seed"]):
            fail("INVALID_TYPE", "seed", "seed must be an integer")
        if "dataset" in payload and not (isinstance(payload["dataset"], str) and payload["dataset"]):
            fail("INVALID_TYPE", "dataset", "dataset must be a non-empty string")
        return ValidationResult(ok=not issues, issues=issues)


def config_from_mapping(payload: Mapping[str, Any], source: str = "<config>") -> ExperimentConfig:
    result = ConfigValidator().validate(payload, source)
    if not result.ok:
        raise ValidationError(result.issues)
    values: dict[str, Any] = {}
    for key, raw in payload.items():
        if key in ENUM_KEYS:
            values[key] = ENUM_KEYS[key](raw)
        elif key in WIDTH_KEYS:
            values[key] = tuple(int(w) for w in raw)
        elif key in TUPLE_FLOAT_KEYS:
            values[key] = tuple(float(v) for v in raw)
        elif key in NONNEGATIVE_KEYS or key in POSITIVE_FLOAT_KEYS or key in UNIT_INTERVAL_KEYS:
            values[key] = float(raw)
        else:
            values[key] = raw
    return ExperimentConfig(**values)


def parse_config(path: str | Path) -> ExperimentConfig:
    source = Path(path)
    text = source.read_text(encoding="utf-8")
    if not text.strip():
        logger.debug("config %s is empty; using defaults", source)
        return ExperimentConfig()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(str(source), exc.lineno, exc.colno, exc.msg) from exc
    if not isinstance(payload, dict):
        raise ConfigParseError(str(source), 1, 1, "top level must be an object")
    return config_from_mapping(payload, str(source))


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    payload = asdict(config)
    for key, value in payload.items():
        if isinstance(value, Enum):
            payload[key] = value.value
        elif isinstance(value, tuple):
            payload[key] = list(value)
    return payload


def config_to_json(config: ExperimentConfig) -> str:
    return canonical_json(config_to_dict(config))


def config_hash(config: ExperimentConfig) -> str:
    return digest_of(config_to_dict(config))


def write_config(config: ExperimentConfig, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(config_to_json(config), encoding="utf-8", newline="\n")
    return target


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
