from __future__ import annotations

import logging
import math
from dataclasses import asdict
from typing import Any, Callable, Mapping

import numpy as np

from triad.autodiff import (
    GradientMap,
    Graph,
    OptimizerState,
    Tensor,
    apply_gate,
    backward,
    cross_entropy,
    forward_eval,
    no_grad,
    optimizer_step,
)
from triad.consolidation import FisherMap, estimate_fisher
from triad.contracts import (
    ExperimentConfig,
    GpMode,
    ImportanceSource,
    LabeledVectors,
    MetricsRow,
    RandomSource,
    SampleOrigin,
    TaskAccuracyRow,
    TrainingEvent,
    TrainingEventType,
)
from triad.core import EngineIntegrityError, EventBus, NonFiniteError, build_forensic_artifact
from triad.core.errors import ReplayProtocolError
from triad.networks import (
    annealed_scale,
    aux_classifier_forward,
    aux_logits,
    expand_output_layer,
    generator_graph,
    mask_sparsity_penalty,
    prior_cumulative_masks,
    sample_masks,
    training_masks,
)
from triad.replay.dataset import (
    ReplayDataset,
    ReplayState,
    TaskStream,
    balanced_labels,
    build_replay_dataset,
    sample_replay_labels,
)
from triad.replay.decision import average_accuracy
from triad.replay.losses import (
    aux_classifier_loss,
    classifier_importance_loss,
    classifier_loss,
    critic_loss,
    generator_loss,
    penalty_points,
)
from triad.replay.model import OPTIMIZER_GROUPS, TripleModel

logger = logging.getLogger(__name__)

EVENT_SCOPE = "replay"


class TripleTrainer:
    """Runs class-incremental training of G, D/D' and C over a task stream.

    All draws come from substreams keyed by task, epoch and batch, so a
    trainer restored at an epoch boundary continues exactly as an
    uninterrupted one would.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        data_dim: int,
        rng: RandomSource,
        *,
        events: EventBus | None = None,
        classifier_enabled: bool = True,
    ) -> None:
        self.config = config
        self.classifier_enabled = classifier_enabled
        self.data_dim = data_dim
        self.rng = rng
        self.events = events or EventBus()
        self.model = TripleModel.build(config, data_dim, rng.spawn("init"))
        self.replay = ReplayState(replay_size=config.replay_size)
        self.metrics: list[MetricsRow] = []
        self.task_metrics: list[TaskAccuracyRow] = []
        self.task_open = False
        self.completed_epochs = 0

    # task lifecycle

    def begin_task(self, task_id: int, classes: tuple[int, ...]) -> None:
        if self.task_open:
            raise ReplayProtocolError(f"task {self.replay.t} is still open")
        if task_id != self.replay.t + 1:
            raise ReplayProtocolError(f"expected task {self.replay.t + 1}, got {task_id}")
        rng = self.rng.spawn(f"task{task_id}:expand")
        model = self.model
        self.replay.t = task_id
        self.replay.task_classes[task_id] = tuple(int(c) for c in classes)
        model.generator.register_task(task_id, classes, rng.spawn("embedding"))
        total = len(self.replay.classes_through(task_id))
        expand_output_layer(model.critic, total, rng.spawn("critic"))
        expand_output_layer(model.classifier, total, rng.spawn("classifier"))
        model.reset_optimizers()
        model.dprime.begin_task(model.critic.params.snapshot(model.critic.aux_names))
        model.c.begin_task(model.classifier.params.snapshot())
        self.task_open = True
        self.completed_epochs = 0
        logger.info("task %d started with classes %s (%d classes total)", task_id, list(classes), total)

    def train_task(self, stream: TaskStream, task_id: int) -> ReplayState:
        if not (self.task_open and self.replay.t == task_id):
            self.begin_task(task_id, stream.classes(task_id))
        current = stream.train(task_id)
        test = self.union_test_set(stream, task_id)
        for epoch in range(self.completed_epochs + 1, self.config.epochs_per_task + 1):
            self.train_epoch(task_id, epoch, current, test)
        self.end_task(task_id, current, stream)
        return self.replay

    def train_epoch(
        self,
        task_id: int,
        epoch: int,
        current: LabeledVectors,
        test: LabeledVectors,
    ) -> MetricsRow:
        rng = self.rng.spawn(f"task{task_id}:epoch{epoch}")
        if self.config.resample_replay and task_id > 1:
            self._regenerate_replay(task_id, rng.spawn("resample"))
        data = build_replay_dataset(self.replay, current)
        batches = self._batches(data, rng.spawn("batches"))
        scale_max = self.config.mask_scale_max
        total_steps = self.config.epochs_per_task * len(batches)
        sums = {"loss_d": 0.0, "loss_dprime": 0.0, "loss_c": 0.0, "loss_g": 0.0, "r_m": 0.0}
        for index, batch in enumerate(batches):
            step = (epoch - 1) * len(batches) + index
            self.model.generator.masks.scale = annealed_scale(step, total_steps, scale_max)
            terms = self._guarded(
                task_id,
                epoch,
                lambda: self.train_batch(task_id, data.x[batch], data.y[batch], rng.spawn(f"batch{index}")),
            )
            for key, value in terms.items():
                sums[key] += value
        count = max(len(batches), 1)
        report = average_accuracy(self.model.critic, self.model.classifier, test, task_id)
        row = MetricsRow(
            task=task_id,
            epoch=epoch,
            a_t=report.a_t,
            acc_dprime=report.acc_dprime,
            acc_c=report.acc_c,
            acc_ensemble=report.acc_ensemble,
            loss_d=sums["loss_d"] / count,
            loss_dprime=sums["loss_dprime"] / count,
            loss_c=sums["loss_c"] / count,
            loss_g=sums["loss_g"] / count,
            r_m=sums["r_m"] / count,
        )
        self.metrics.append(row)
        self.completed_epochs = epoch
        logger.info(
            "task %d epoch %d: A=%.2f D'=%.2f C=%.2f loss_D=%.4f loss_G=%.4f",
            task_id,
            epoch,
            row.a_t,
            row.acc_dprime,
            row.acc_c,
            row.loss_d,
            row.loss_g,
        )
        self.events.publish(
            TrainingEvent(EVENT_SCOPE, TrainingEventType.EPOCH_COMPLETE, task_id, epoch, asdict(row))
        )
        return row

    def end_task(self, task_id: int, current: LabeledVectors, stream: TaskStream) -> None:
        model = self.model
        critic, classifier = model.critic, model.classifier
        model.generator.masks.complete(task_id)
        size = self.config.replay_size or len(current)
        self.replay.store(
            task_id,
            self.generate_samples(
                balanced_labels(self.replay.task_classes[task_id], size),
                task_id,
                self.rng.spawn(f"task{task_id}:replay"),
            ),
        )
        model.dprime.end_task(
            critic.params.snapshot(critic.aux_names),
            task_id,
            lambda: self.dprime_importance(current, self.rng.spawn(f"task{task_id}:fisher:dprime")),
            critic.output_names,
        )
        if self.classifier_enabled:
            model.c.end_task(
                classifier.params.snapshot(),
                task_id,
                lambda: self.classifier_importance(current, self.rng.spawn(f"task{task_id}:fisher:c")),
                classifier.output_names,
            )
        stream.release(task_id)
        self.task_open = False
        for earlier in range(1, task_id + 1):
            report = average_accuracy(critic, classifier, stream.test(earlier), task_id)
            self.task_metrics.append(TaskAccuracyRow(task_id, earlier, report.acc_ensemble))
        logger.info("task %d finished; %d generated samples stored", task_id, size)
        self.events.publish(
            TrainingEvent(
                EVENT_SCOPE,
                TrainingEventType.TASK_COMPLETE,
                task_id,
                self.completed_epochs,
                {"replay_size": size},
            )
        )

    def union_test_set(self, stream: TaskStream, task_id: int) -> LabeledVectors:
        parts = [stream.test(task) for task in range(1, task_id + 1)]
        return LabeledVectors(
            np.concatenate([p.x for p in parts], axis=0),
            np.concatenate([p.y for p in parts]).astype(np.int64),
        )

    # generation and importance

    def generate_samples(self, labels: np.ndarray, t: int, rng: RandomSource) -> LabeledVectors:
        generator = self.model.generator
        labels = np.asarray(labels, dtype=np.int64)
        z = rng.normal((labels.shape[0], generator.latent_dim))
        masks = sample_masks(generator, labels)
        with no_grad():
            x = generator_graph(generator.params.as_tensors(()), Tensor(z), labels, masks).numpy()
        return LabeledVectors(x, labels)

    def dprime_importance(self, data: LabeledVectors, rng: RandomSource) -> FisherMap:
        critic = self.model.critic
        depth = len(critic.hidden)
        return estimate_fisher(
            critic.params.slice(critic.aux_names),
            lambda leaves, x, y: cross_entropy(aux_logits(leaves, x, depth), y),
            data,
            self.config.fisher_samples,
            excluded=critic.output_names,
            source=ImportanceSource.AUX_CE,
            rng=rng,
        )

    def classifier_importance(self, data: LabeledVectors, rng: RandomSource) -> FisherMap:
        critic, classifier, c = self.model.critic, self.model.classifier, self.model.c
        depth = len(classifier.hidden)

        def loss(leaves: Mapping[str, Tensor], x: Tensor, y: np.ndarray) -> Tensor:
            targets = aux_classifier_forward(critic, x.data).data
            return classifier_importance_loss(leaves, x, y, targets, depth, c.penalty(leaves))

        return estimate_fisher(
            classifier.params.snapshot(),
            loss,
            data,
            self.config.fisher_samples,
            excluded=classifier.output_names,
            source=ImportanceSource.CLASSIFIER_PRIME,
            rng=rng,
        )

    # one batch: critic steps, D' step, C step, G step

    def train_batch(self, task_id: int, x: np.ndarray, y: np.ndarray, rng: RandomSource) -> dict[str, float]:
        config = self.config
        loss_d = 0.0
        for k in range(config.n_critic):
            step_rng = rng.spawn(f"critic{k}")
            fake = self.generate_samples(y, task_id, step_rng.spawn("z")).x
            epsilon = step_rng.uniform(0.0, 1.0, y.shape[0]) if config.gp_mode is GpMode.INTERPOLATE else None
            loss_d += self._critic_step(x, fake, epsilon)
        loss_dprime = self._dprime_step(x, y)
        loss_c = self._classifier_step(x) if self.classifier_enabled else 0.0
        loss_g, r_m = self._generator_step(task_id, y.shape[0], rng.spawn("generator"))
        return {
            "loss_d": loss_d / max(config.n_critic, 1),
            "loss_dprime": loss_dprime,
            "loss_c": loss_c,
            "loss_g": loss_g,
            "r_m": r_m,
        }

    def _critic_step(self, x_real: np.ndarray, x_fake: np.ndarray, epsilon: np.ndarray | None) -> float:
        critic = self.model.critic
        names = critic.critic_names
        depth = len(critic.hidden)
        lambda_gp = self.config.lambda_gp

        def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
            terms = critic_loss(leaves, leaves["x_real"], leaves["x_fake"], leaves["x_hat"], depth, lambda_gp)
            return {"loss": terms.total, "gp": terms.gradient_penalty}

        graph = Graph(build, leaves=[*names, "x_real", "x_fake", "x_hat"], trainable=names, name="critic")
        inputs: dict[str, Any] = dict(critic.params.slice(names))
        inputs.update(x_real=x_real, x_fake=x_fake, x_hat=penalty_points(x_real, x_fake, epsilon))
        outputs = forward_eval(graph, inputs)
        grads = backward(graph, outputs["loss"])
        self._apply(critic.params.slice(names), grads, "critic", critic.params.assign)
        return outputs["loss"].item()

    def _dprime_step(self, x: np.ndarray, y: np.ndarray) -> float:
        critic = self.model.critic
        names = critic.aux_names
        depth = len(critic.hidden)
        consolidator = self.model.dprime

        def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
            total, ce = aux_classifier_loss(leaves, leaves["x"], y, depth, consolidator.penalty(leaves))
            return {"loss": total, "ce": ce}

        graph = Graph(build, leaves=[*names, "x"], trainable=names, name="aux_classifier")
        before = critic.params.snapshot(names)
        outputs = forward_eval(graph, {**before, "x": x})
        grads = backward(graph, outputs["loss"])
        after = self._apply(before, grads, "dprime", critic.params.assign)
        consolidator.observe_step(before, after, grads.arrays())
        return outputs["loss"].item()

    def _classifier_step(self, x: np.ndarray) -> float:
        critic, classifier = self.model.critic, self.model.classifier
        names = tuple(classifier.params)
        depth = len(classifier.hidden)
        consolidator = self.model.c
        targets = aux_classifier_forward(critic, x).data

        def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
            total, distill = classifier_loss(leaves, leaves["x"], targets, depth, consolidator.penalty(leaves))
            return {"loss": total, "distill": distill}

        graph = Graph(build, leaves=[*names, "x"], trainable=names, name="classifier")
        before = classifier.params.snapshot()
        outputs = forward_eval(graph, {**before, "x": x})
        grads = backward(graph, outputs["loss"])
        after = self._apply(before, grads, "classifier", classifier.params.assign)
        consolidator.observe_step(before, after, grads.arrays())
        return outputs["loss"].item()

    def _generator_step(self, task_id: int, n: int, rng: RandomSource) -> tuple[float, float]:
        generator, critic = self.model.generator, self.model.critic
        labels = sample_replay_labels(self.replay.task_classes, task_id, n, rng)
        z = rng.normal((n, generator.latent_dim))
        mask_names = [f"mask{layer}" for layer in range(len(generator.hidden))]
        prior = prior_cumulative_masks(generator.masks, task_id)
        critic_params = critic.params.as_tensors(())
        depth = len(critic.hidden)
        lambda_g = self.config.lambda_g

        def build(leaves: Mapping[str, Tensor]) -> dict[str, Tensor]:
            current = [generator.masks.mask_tensor(leaves[name]) for name in mask_names]
            sparsity = mask_sparsity_penalty(current, prior)
            masks = training_masks(generator, labels, task_id, current)
            fake = generator_graph(leaves, leaves["z"], labels, masks)
            total, _, _ = generator_loss(critic_params, fake, labels, depth, sparsity, lambda_g)
            return {"loss": total, "r_m": sparsity}

        params = dict(generator.params.slice(generator.params))
        for layer, name in enumerate(mask_names):
            params[name] = generator.masks.embeddings[task_id][layer]
        graph = Graph(build, leaves=[*params, "z"], trainable=list(params), name="generator")
        outputs = forward_eval(graph, {**params, "z": z})
        grads = apply_gate(backward(graph, outputs["loss"]), generator.gradient_gates(task_id))

        def assign(updated: Mapping[str, np.ndarray]) -> None:
            generator.params.assign({k: v for k, v in updated.items() if k in generator.params})
            for layer, name in enumerate(mask_names):
                generator.masks.set_embedding(task_id, layer, updated[name])

        self._apply(params, grads, "generator", assign)
        return outputs["loss"].item(), outputs["r_m"].item()

    def _apply(
        self,
        params: Mapping[str, np.ndarray],
        grads: GradientMap,
        group: str,
        assign: Callable[[Mapping[str, np.ndarray]], None],
    ) -> dict[str, np.ndarray]:
        updated = optimizer_step(params, grads, self.model.optimizers[group])
        assign(updated)
        return updated

    # replay plumbing

    def _batches(self, data: ReplayDataset, rng: RandomSource) -> list[np.ndarray]:
        size = self.config.batch_size
        n_batches = max(math.ceil(len(data) / size), 1)
        generated = np.flatnonzero(data.origin == SampleOrigin.GENERATED)
        if generated.size == 0:
            order = rng.permutation(len(data))
            return [order[b * size : (b + 1) * size] for b in range(n_batches)]
        real = np.flatnonzero(data.origin == SampleOrigin.REAL)
        real_order = real[rng.permutation(real.size)]
        generated_order = generated[rng.permutation(generated.size)]
        n_generated = size // 2
        n_real = size - n_generated
        return [
            np.concatenate(
                [
                    real_order.take(np.arange(b * n_real, (b + 1) * n_real), mode="wrap"),
                    generated_order.take(np.arange(b * n_generated, (b + 1) * n_generated), mode="wrap"),
                ]
            )
            for b in range(n_batches)
        ]

    def _regenerate_replay(self, task_id: int, rng: RandomSource) -> None:
        for earlier in range(1, task_id):
            previous = self.replay.generated[earlier]
            self.replay.store(earlier, self.generate_samples(previous.y, earlier, rng.spawn(f"task{earlier}")))

    def _guarded(self, task_id: int, epoch: int, step: Callable[[], dict[str, float]]) -> dict[str, float]:
        try:
            return step()
        except NonFiniteError as exc:
            artifact = build_forensic_artifact(
                engine_scope="replay_trainer",
                error_code="NON_FINITE_TRAINING_STEP",
                message=str(exc),
                state_snapshot={
                    "task": task_id,
                    "epoch": epoch,
                    "mask_scale": self.model.generator.masks.scale,
                    "classes": self.replay.classes_through(task_id),
                },
                context={"config": _jsonable(asdict(self.config))},
                identifiers={"seed": str(self.config.seed), "task": str(task_id)},
                causal_fragment=["train_batch", type(exc).__name__],
            )
            raise EngineIntegrityError(artifact) from exc

    # checkpoint state

    def export_state(self) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
        model = self.model
        arrays: dict[str, np.ndarray] = {}
        for prefix, store in (
            ("generator", model.generator.params),
            ("critic", model.critic.params),
            ("classifier", model.classifier.params),
        ):
            for name, values in store.items():
                arrays[f"{prefix}/{name}"] = values
        masks = model.generator.masks
        for task, layers in masks.embeddings.items():
            for layer, values in enumerate(layers):
                arrays[f"mask/{task}/{layer}"] = values
        consolidators: dict[str, Any] = {}
        for key, consolidator in (("dprime", model.dprime), ("c", model.c)):
            cons_arrays, cons_meta = consolidator.export_state()
            consolidators[key] = cons_meta
            for name, values in cons_arrays.items():
                arrays[f"cons/{key}/{name}"] = values
        optimizers: dict[str, Any] = {}
        for group, state in model.optimizers.items():
            optimizers[group] = {"step": state.step}
            for name, values in state.first_moment.items():
                arrays[f"opt/{group}/m/{name}"] = values
            for name, values in state.second_moment.items():
                arrays[f"opt/{group}/v/{name}"] = values
        for task, samples in self.replay.generated.items():
            arrays[f"replay/{task}/x"] = samples.x
            arrays[f"replay/{task}/y"] = samples.y.astype(np.int64)
        meta: dict[str, Any] = {
            "t": self.replay.t,
            "task_open": self.task_open,
            "completed_epochs": self.completed_epochs,
            "task_classes": {str(t): list(c) for t, c in self.replay.task_classes.items()},
            "class_to_task": {str(c): t for c, t in model.generator.class_to_task.items()},
            "mask_completed": sorted(masks.completed),
            "mask_scale": masks.scale,
            "expansions": {
                "critic": [list(e) for e in model.critic.expansions],
                "classifier": [list(e) for e in model.classifier.expansions],
            },
            "consolidators": consolidators,
            "optimizers": optimizers,
            "metrics": [asdict(row) for row in self.metrics],
            "task_metrics": [asdict(row) for row in self.task_metrics],
        }
        return arrays, meta

    def restore_state(self, arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any]) -> None:
        model = self.model
        for prefix, store in (
            ("generator", model.generator.params),
            ("critic", model.critic.params),
            ("classifier", model.classifier.params),
        ):
            for name in list(store):
                store.replace(name, arrays[f"{prefix}/{name}"])
        masks = model.generator.masks
        masks.embeddings = {}
        for key, values in sorted(arrays.items()):
            if key.startswith("mask/"):
                _, task, layer = key.split("/")
                masks.embeddings.setdefault(int(task), [np.zeros(0)] * masks.depth)[int(layer)] = np.array(values)
        masks.completed = {int(t) for t in meta["mask_completed"]}
        masks.scale = float(meta["mask_scale"])
        model.generator.class_to_task = {int(c): int(t) for c, t in meta["class_to_task"].items()}
        model.critic.expansions = [tuple(e) for e in meta["expansions"]["critic"]]
        model.classifier.expansions = [tuple(e) for e in meta["expansions"]["classifier"]]
        for key, consolidator in (("dprime", model.dprime), ("c", model.c)):
            prefix = f"cons/{key}/"
            consolidator.restore_state(
                {k[len(prefix) :]: v for k, v in arrays.items() if k.startswith(prefix)},
                meta["consolidators"][key],
            )
        for group in OPTIMIZER_GROUPS:
            state: OptimizerState = model.optimizers[group]
            state.step = int(meta["optimizers"][group]["step"])
            state.first_moment = _strip(arrays, f"opt/{group}/m/")
            state.second_moment = _strip(arrays, f"opt/{group}/v/")
        self.replay.t = int(meta["t"])
        self.replay.task_classes = {int(t): tuple(c) for t, c in meta["task_classes"].items()}
        self.replay.generated = {}
        for task in self.replay.task_classes:
            if f"replay/{task}/x" in arrays:
                self.replay.generated[task] = LabeledVectors(
                    np.array(arrays[f"replay/{task}/x"]),
                    np.array(arrays[f"replay/{task}/y"]).astype(np.int64),
                )
        self.task_open = bool(meta["task_open"])
        self.completed_epochs = int(meta["completed_epochs"])
        self.metrics = [MetricsRow(**row) for row in meta["metrics"]]
        self.task_metrics = [TaskAccuracyRow(**row) for row in meta["task_metrics"]]


def train_task(trainer: TripleTrainer, stream: TaskStream, task_id: int) -> ReplayState:
    return trainer.train_task(stream, task_id)


def _strip(arrays: Mapping[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    return {key[len(prefix) :]: np.array(values) for key, values in arrays.items() if key.startswith(prefix)}


def _jsonable(payload: Any) -> Any:
    if isinstance(payload, dict):
        return {key: _jsonable(value) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [_jsonable(value) for value in payload]
    if hasattr(payload, "value"):
        return payload.value
    return payload
