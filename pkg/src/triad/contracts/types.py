from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, IntEnum
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np


class ConsolidationKind(str, Enum):
    EWC = "ewc"
    SI = "si"
    NONE = "none"


class GpMode(str, Enum):
    REPLAY = "replay"
    INTERPOLATE = "interpolate"


class FisherCombine(str, Enum):
    SUM = "sum"
    REPLACE = "replace"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class ImportanceSource(str, Enum):
    AUX_CE = "aux_ce"
    CLASSIFIER_PRIME = "classifier_prime"
    PATH_INTEGRAL = "path_integral"
    CUSTOM = "custom"


class TrainingEventType(str, Enum):
    EPOCH_COMPLETE = "epoch_complete"
    TASK_COMPLETE = "task_complete"
    CHECKPOINT_WRITTEN = "checkpoint_written"
    RUN_COMPLETE = "run_complete"


class SampleOrigin(IntEnum):
    REAL = 0
    GENERATED = 1


class RandomSource(Protocol):
    def normal(self, size: int | tuple[int, ...], scale: float = 1.0) -> np.ndarray: ...

    def uniform(self, low: float, high: float, size: int | tuple[int, ...]) -> np.ndarray: ...

    def integers(self, low: int, high: int, size: int | tuple[int, ...]) -> np.ndarray: ...

    def permutation(self, n: int) -> np.ndarray: ...

    def spawn(self, substream_id: str) -> RandomSource: ...


@dataclass(slots=True)
class ValidationIssue:
    code: str
    severity: str
    field_path: str
    entity_id: str
    message: str


@dataclass(slots=True)
class ValidationResult:
    ok: bool
    issues: list[ValidationIssue]


class ValidationError(ValueError):
    def __init__(self, issues: list[ValidationIssue]) -> None:
        message = "; ".join(f"{i.code}:{i.entity_id}:{i.message}" for i in issues)
        super().__init__(message)
        self.issues = issues


@dataclass(slots=True)
class ForensicArtifact:
    artifact_id: str
    timestamp: datetime
    engine_scope: str
    error_code: str
    message: str
    state_snapshot: Mapping[str, Any]
    context: Mapping[str, Any]
    identifiers: Mapping[str, str]
    causal_fragment: Sequence[str]


@dataclass(slots=True)
class TrainingEvent:
    scope: str
    event_type: TrainingEventType
    task: int
    epoch: int
    payload: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    seed: int = 0
    dataset: str = "gauss2d-10"
    classes_per_task: int = 2
    num_tasks: int | None = None
    allow_ragged: bool = False
    train_per_class: int = 200
    test_per_class: int = 100
    lambda_gp: float = 10.0
    lambda_dprime: float = 100.0
    lambda_c: float = 100.0
    lambda_g: float = 1.0
    consolidation_dprime: ConsolidationKind = ConsolidationKind.EWC
    consolidation_c: ConsolidationKind = ConsolidationKind.EWC
    si_xi: float = 0.1
    fisher_combine: FisherCombine = FisherCombine.SUM
    fisher_samples: int = 512
    n_critic: int = 5
    epochs_per_task: int = 20
    batch_size: int = 64
    replay_size: int | None = None
    resample_replay: bool = False
    gp_mode: GpMode = GpMode.REPLAY
    mask_scale_max: float = 400.0
    mask_binarize: bool = False
    latent_dim: int = 8
    label_embedding_dim: int = 4
    generator_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (64, 64)
    classifier_hidden: tuple[int, ...] = (64, 64)
    optimizer: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    checkpoint_every_epoch: bool = False
    alignment_lambdas: tuple[float, ...] = (0.0, 10.0, 100.0)
    alignment_real_epochs: int = 20
    alignment_generated_epochs: int = 20
    probe_task: int = 1


@dataclass(slots=True)
class LabeledVectors:
    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.x.shape[1])


@dataclass(slots=True)
class TaskDataset:
    """Classes of one task plus lazy access to their train/test vectors."""

    task_id: int
    classes: tuple[int, ...]
    train_loader: Callable[[], LabeledVectors]
    test_loader: Callable[[], LabeledVectors]

    def train(self) -> LabeledVectors:
        return self.train_loader()

    def test(self) -> LabeledVectors:
        return self.test_loader()


@dataclass(slots=True)
class AccuracyReport:
    task: int
    a_t: float
    acc_dprime: float
    acc_c: float
    acc_ensemble: float
    sample_count: int


@dataclass(slots=True)
class MetricsRow:
    task: int
    epoch: int
    a_t: float
    acc_dprime: float
    acc_c: float
    acc_ensemble: float
    loss_d: float
    loss_dprime: float
    loss_c: float
    loss_g: float
    r_m: float


@dataclass(slots=True)
class TaskAccuracyRow:
    task: int
    evaluated_task: int
    acc_ensemble: float


@dataclass(slots=True)
class SimilarityRow:
    group: str
    cosine: float
    correlation: float
    lambda_c: float | None = None


@dataclass(slots=True)
class SimilarityReport:
    rows: list[SimilarityRow]
    seed: int
    dataset_ids: tuple[str, str]
    lambda_c: float | None = None

    def mean_cosine(self) -> float:
        if not self.rows:
            return 0.0
        return float(np.mean([row.cosine for row in self.rows]))


@dataclass(slots=True)
class LayerCapacity:
    layer: int
    used_fraction: float
    shared_fraction: float
    free_fraction: float
    exclusive_by_task: dict[int, float]


@dataclass(slots=True)
class AblationRow:
    variant: str
    seed: int
    a_final: float
    acc_dprime: float
    acc_c: float
    acc_ensemble: float
