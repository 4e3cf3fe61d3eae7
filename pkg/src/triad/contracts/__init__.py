from .types import (
    AblationRow,
    AccuracyReport,
    ConsolidationKind,
    ExperimentConfig,
    FisherCombine,
    ForensicArtifact,
    GpMode,
    ImportanceSource,
    LabeledVectors,
    LayerCapacity,
    MetricsRow,
    OptimizerKind,
    RandomSource,
    SampleOrigin,
    SimilarityReport,
    SimilarityRow,
    TaskAccuracyRow,
    TaskDataset,
    TrainingEvent,
    TrainingEventType,
    ValidationError,
    ValidationIssue,
    ValidationResult,
)

__all__ = [
    "AblationRow",
    "AccuracyReport",
    "ConsolidationKind",
    "ExperimentConfig",
    "FisherCombine",
    "ForensicArtifact",
    "GpMode",
    "ImportanceSource",
    "LabeledVectors",
    "LayerCapacity",
    "MetricsRow",
    "OptimizerKind",
    "RandomSource",
    "SampleOrigin",
    "SimilarityReport",
    "SimilarityRow",
    "TaskAccuracyRow",
    "TaskDataset",
    "TrainingEvent",
    "TrainingEventType",
    "ValidationError",
    "ValidationIssue",
    "ValidationResult",
]
