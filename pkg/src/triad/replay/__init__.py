from .dataset import (
    ReplayDataset,
    ReplayState,
    TaskStream,
    balanced_labels,
    build_replay_dataset,
    sample_replay_labels,
)
from .decision import accuracy_percent, average_accuracy, predict
from .losses import (
    CriticTerms,
    aux_classifier_loss,
    classifier_importance_loss,
    classifier_loss,
    critic_loss,
    generator_loss,
    penalty_points,
)
from .model import OPTIMIZER_GROUPS, TripleModel
from .trainer import TripleTrainer, train_task

__all__ = [
    "CriticTerms",
    "OPTIMIZER_GROUPS",
    "ReplayDataset",
    "ReplayState",
    "TaskStream",
    "TripleModel",
    "TripleTrainer",
    "accuracy_percent",
    "aux_classifier_loss",
    "average_accuracy",
    "balanced_labels",
    "build_replay_dataset",
    "classifier_importance_loss",
    "classifier_loss",
    "critic_loss",
    "generator_loss",
    "penalty_points",
    "predict",
    "sample_replay_labels",
    "train_task",
]
