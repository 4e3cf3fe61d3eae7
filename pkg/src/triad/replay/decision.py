from __future__ import annotations

import numpy as np

from triad.contracts import AccuracyReport, LabeledVectors
from triad.core.errors import ShapeError
from triad.networks import ClassifierNet, CriticNet, aux_classifier_forward, classifier_forward


def predict(p_dprime: np.ndarray, p_c: np.ndarray) -> np.ndarray:
    """argmax_k max(P_D'(k|x), P_C(k|x)); ties go to the lowest class index."""
    left = np.atleast_2d(np.asarray(p_dprime, dtype=np.float64))
    right = np.atleast_2d(np.asarray(p_c, dtype=np.float64))
    if left.shape != right.shape:
        raise ShapeError(f"head widths differ: D' {left.shape} vs C {right.shape}")
    return np.argmax(np.maximum(left, right), axis=1)


def accuracy_percent(predicted: np.ndarray, labels: np.ndarray) -> float:
    if labels.shape[0] == 0:
        raise ValueError("accuracy over an empty test set")
    return 100.0 * float(np.mean(predicted == labels))


def average_accuracy(
    critic: CriticNet,
    classifier: ClassifierNet,
    test: LabeledVectors,
    task: int,
) -> AccuracyReport:
    """Single-head accuracy on the union test set of every class learned so far."""
    if len(test) == 0:
        raise ValueError(f"empty test set for task {task}")
    p_dprime = aux_classifier_forward(critic, test.x).data
    p_c = classifier_forward(classifier, test.x).data
    labels = test.y.astype(np.int64)
    ensemble = accuracy_percent(predict(p_dprime, p_c), labels)
    return AccuracyReport(
        task=task,
        a_t=ensemble,
        acc_dprime=accuracy_percent(np.argmax(p_dprime, axis=1), labels),
        acc_c=accuracy_percent(np.argmax(p_c, axis=1), labels),
        acc_ensemble=ensemble,
        sample_count=len(test),
    )
