from __future__ import annotations

import logging
from typing import Callable, Mapping, Sequence

import numpy as np

from triad.autodiff import Graph, OptimizerState, Tensor, backward, cross_entropy, forward_eval, optimizer_step
from triad.consolidation import Consolidator, EwcConsolidator, FisherMap, estimate_fisher
from triad.contracts import (
    ExperimentConfig,
    ImportanceSource,
    LabeledVectors,
    RandomSource,
    SimilarityReport,
    TaskDataset,
)
from triad.core import DiagnosticsError, seeded_random
from triad.data import data_dim, load_dataset
from triad.diagnostics.similarity import similarity_rows
from triad.networks import ClassifierNet, CriticNet, aux_logits, classifier_logits, critic_score, expand_output_layer
from triad.replay import TaskStream, TripleTrainer, balanced_labels

logger = logging.getLogger(__name__)

Objective = Callable[[Mapping[str, Tensor], Tensor, np.ndarray, int], Tensor]


def _critic_objective(params: Mapping[str, Tensor], x: Tensor, y: np.ndarray, depth: int) -> Tensor:
    return -critic_score(params, x, depth).mean()


def _aux_objective(params: Mapping[str, Tensor], x: Tensor, y: np.ndarray, depth: int) -> Tensor:
    return cross_entropy(aux_logits(params, x, depth), y)


HEAD_OBJECTIVES: dict[str, Objective] = {"critic": _critic_objective, "aux": _aux_objective}


def classifier_groups(classifier: ClassifierNet) -> list[str]:
    return [*(f"fc{layer}" for layer in range(len(classifier.hidden))), "out"]


def classifier_fisher(
    classifier: ClassifierNet,
    data: LabeledVectors,
    n_samples: int,
    rng: RandomSource,
) -> FisherMap:
    depth = len(classifier.hidden)
    return estimate_fisher(
        classifier.params.snapshot(),
        lambda leaves, x, y: cross_entropy(classifier_logits(leaves, x, depth), y),
        data,
        n_samples,
        source=ImportanceSource.CUSTOM,
        rng=rng,
    )


def train_classifier_phase(
    classifier: ClassifierNet,
    data: LabeledVectors,
    epochs: int,
    config: ExperimentConfig,
    rng: RandomSource,
    consolidator: Consolidator | None = None,
) -> None:
    """Plain minibatch cross-entropy training, optionally under a consolidation penalty."""
    depth = len(classifier.hidden)
    names = tuple(classifier.params)
    state = OptimizerState.from_config(config)
    for epoch in range(1, epochs + 1):
        order = rng.spawn(f"epoch{epoch}").permutation(len(data))
        for start in range(0, len(data), config.batch_size):
            batch = order[start : start + config.batch_size]
            labels = data.y[batch]

            def build(leaves: Mapping[str, Tensor], labels: np.ndarray = labels) -> dict[str, Tensor]:
                loss = cross_entropy(classifier_logits(leaves, leaves["x"], depth), labels)
                if consolidator is not None:
                    loss = loss + consolidator.penalty(leaves)
                return {"loss": loss}

            graph = Graph(build, leaves=[*names, "x"], trainable=names, name="alignment_classifier")
            params = classifier.params.snapshot()
            outputs = forward_eval(graph, {**params, "x": data.x[batch]})
            classifier.params.assign(optimizer_step(params, backward(graph, outputs["loss"]), state))


def replay_alignment_sweep(
    config: ExperimentConfig,
    real: LabeledVectors,
    generated: LabeledVectors,
    rng: RandomSource,
    lambdas: Sequence[float] | None = None,
) -> list[SimilarityReport]:
    """For each λ_C: train C on real data, then on generated data of the same
    classes under that consolidation strength, and compare the importance
    maps of the two data sources per layer."""
    if len(real) == 0 or len(generated) == 0:
        raise DiagnosticsError("alignment needs both real and generated samples")
    num_classes = int(max(real.y.max(), generated.y.max())) + 1
    reports: list[SimilarityReport] = []
    for lam in lambdas if lambdas is not None else config.alignment_lambdas:
        classifier = ClassifierNet(real.feature_dim, config.classifier_hidden, rng.spawn("classifier"))
        expand_output_layer(classifier, num_classes, rng.spawn("expand"))
        train_classifier_phase(classifier, real, config.alignment_real_epochs, config, rng.spawn("real"))
        consolidator = EwcConsolidator(lam)
        consolidator.end_task(
            classifier.params.snapshot(),
            1,
            lambda: estimate_fisher(
                classifier.params.snapshot(),
                lambda leaves, x, y: cross_entropy(classifier_logits(leaves, x, len(classifier.hidden)), y),
                real,
                config.fisher_samples,
                excluded=classifier.output_names,
                source=ImportanceSource.CLASSIFIER_PRIME,
                rng=rng.spawn("anchor_fisher"),
            ),
            classifier.output_names,
        )
        train_classifier_phase(
            classifier,
            generated,
            config.alignment_generated_epochs,
            config,
            rng.spawn("generated"),
            consolidator,
        )
        f_real = classifier_fisher(classifier, real, config.fisher_samples, rng.spawn("fisher:real"))
        f_generated = classifier_fisher(classifier, generated, config.fisher_samples, rng.spawn("fisher:generated"))
        rows = similarity_rows(f_real, f_generated, classifier_groups(classifier), float(lam))
        report = SimilarityReport(rows, config.seed, ("real", "generated"), float(lam))
        logger.info("alignment λ_C=%g mean cosine %.4f", lam, report.mean_cosine())
        reports.append(report)
    return reports


def replay_alignment_experiment(
    config: ExperimentConfig,
    tasks: Sequence[TaskDataset] | None = None,
    trainer: TripleTrainer | None = None,
) -> list[SimilarityReport]:
    tasks = list(tasks) if tasks is not None else load_dataset(config.dataset, config)
    probe = config.probe_task
    if probe > len(tasks):
        raise DiagnosticsError(f"probe task {probe} exceeds the {len(tasks)} available tasks")
    rng = seeded_random(config.seed).spawn("diagnostics:alignment")
    if trainer is None:
        trainer = TripleTrainer(config, data_dim(tasks), seeded_random(config.seed))
        stream = TaskStream(tasks)
        for task_id in range(1, probe + 1):
            trainer.train_task(stream, task_id)
    if probe not in trainer.model.generator.masks.completed:
        raise DiagnosticsError(f"no trained generator for task {probe}")
    real = tasks[probe - 1].train()
    labels = balanced_labels(tasks[probe - 1].classes, len(real))
    generated = trainer.generate_samples(labels, probe, rng.spawn("generated"))
    return replay_alignment_sweep(config, real, generated, rng)


def head_interference_report(
    critic: CriticNet,
    data: LabeledVectors,
    n_samples: int,
    rng: RandomSource,
    *,
    seed: int = 0,
    objectives: tuple[str, str] = ("critic", "aux"),
) -> SimilarityReport:
    """Compare importance of two head objectives on the shared trunk groups."""
    depth = len(critic.hidden)
    params = critic.params.snapshot()
    maps: list[FisherMap] = []
    for index, key in enumerate(objectives):
        objective = HEAD_OBJECTIVES[key]
        maps.append(
            estimate_fisher(
                params,
                lambda leaves, x, y, objective=objective: objective(leaves, x, y, depth),
                data,
                n_samples,
                source=ImportanceSource.CUSTOM,
                rng=rng.spawn(f"objective{index}"),
            )
        )
    rows = similarity_rows(maps[0], maps[1], critic.trunk_groups())
    return SimilarityReport(rows, seed, objectives)


def joint_head_interference_experiment(
    config: ExperimentConfig,
    tasks: Sequence[TaskDataset] | None = None,
) -> SimilarityReport:
    """Train the critic with its auxiliary head (no independent classifier)
    over the task sequence, then measure how the two heads' importance
    agrees on every trunk layer."""
    tasks = list(tasks) if tasks is not None else load_dataset(config.dataset, config)
    trainer = TripleTrainer(config, data_dim(tasks), seeded_random(config.seed), classifier_enabled=False)
    stream = TaskStream(tasks)
    for task in tasks:
        trainer.train_task(stream, task.task_id)
    data = trainer.union_test_set(stream, tasks[-1].task_id)
    report = head_interference_report(
        trainer.model.critic,
        data,
        config.fisher_samples,
        seeded_random(config.seed).spawn("diagnostics:interference"),
        seed=config.seed,
    )
    logger.info("head interference cosines: %s", [round(row.cosine, 4) for row in report.rows])
    return report
