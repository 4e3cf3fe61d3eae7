from .capacity import mask_usage_report
from .experiments import (
    HEAD_OBJECTIVES,
    classifier_fisher,
    head_interference_report,
    joint_head_interference_experiment,
    replay_alignment_experiment,
    replay_alignment_sweep,
    train_classifier_phase,
)
from .similarity import fim_correlation, fim_cosine_similarity, group_vector, similarity_rows

__all__ = [
    "HEAD_OBJECTIVES",
    "classifier_fisher",
    "fim_correlation",
    "fim_cosine_similarity",
    "group_vector",
    "head_interference_report",
    "joint_head_interference_experiment",
    "mask_usage_report",
    "replay_alignment_experiment",
    "replay_alignment_sweep",
    "similarity_rows",
    "train_classifier_phase",
]
