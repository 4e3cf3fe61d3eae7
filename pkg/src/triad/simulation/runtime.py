from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import pandas as pd

from triad import __version__
from triad.contracts import (
    AccuracyReport,
    ExperimentConfig,
    ForensicArtifact,
    MetricsRow,
    TaskDataset,
    TrainingEvent,
    TrainingEventType,
)
from triad.core import (
    CheckpointMismatchError,
    EngineIntegrityError,
    EventBus,
    ReplayProtocolError,
    build_forensic_artifact,
    canonical_json,
    persist_forensic_artifact,
    run_id,
    seeded_random,
)
from triad.data import config_from_mapping, config_hash, config_to_dict, data_dim, load_dataset
from triad.export import write_frame, write_metrics_csv, write_task_accuracy_csv
from triad.persistence import AnalyticsStore, Checkpoint, load_checkpoint, save_checkpoint
from triad.replay import TaskStream, TripleTrainer, average_accuracy
from triad.replay.trainer import EVENT_SCOPE

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "TRIAD_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = Path("runs")
RUNTIME_SCOPE = "runtime"


def resolve_output_root(flag: str | Path | None = None) -> Path:
    """Command-line flag, then $TRIAD_OUTPUT_DIR, then ./runs."""
    if flag is not None:
        return Path(flag)
    env = os.environ.get(ENV_OUTPUT_DIR)
    if env:
        return Path(env)
    return DEFAULT_OUTPUT_DIR


class RuntimePaths:
    def __init__(self, root: Path, run_id: str) -> None:
        self.root = root
        self.run_id = run_id

    @property
    def run_dir(self) -> Path:
        return self.root / self.run_id

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / "manifest.json"

    @property
    def metrics_path(self) -> Path:
        return self.run_dir / "metrics.csv"

    @property
    def task_metrics_path(self) -> Path:
        return self.run_dir / "metrics_by_task.csv"

    @property
    def similarity_path(self) -> Path:
        return self.run_dir / "similarity.csv"

    @property
    def joint_head_path(self) -> Path:
        return self.run_dir / "joint_head_similarity.csv"

    @property
    def checkpoint_dir(self) -> Path:
        return self.run_dir / "checkpoints"

    @property
    def forensic_dir(self) -> Path:
        return self.run_dir / "forensics"

    @property
    def duckdb_path(self) -> Path:
        return self.root / "analytics.duckdb"

    def checkpoint_path(self, task: int, epoch: int | None = None) -> Path:
        if epoch is None:
            return self.checkpoint_dir / f"task{task:02d}.ckpt"
        return self.checkpoint_dir / f"task{task:02d}_epoch{epoch:03d}.ckpt"


@dataclass(slots=True)
class RunResult:
    success: bool
    message: str
    run_dir: Path
    outputs: list[Path] = field(default_factory=list)
    forensic_path: str | None = None
    final: MetricsRow | None = None


def write_manifest(path: Path, config: ExperimentConfig, digest: str, run: str) -> Path:
    # no timestamps: (config, seed) determines the bytes
    manifest = {
        "config": config_to_dict(config),
        "config_hash": digest,
        "dataset": config.dataset,
        "run_id": run,
        "seed": config.seed,
        "version": __version__,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_name(f"{path.name}.tmp")
    temp.write_text(canonical_json(manifest), encoding="utf-8", newline="\n")
    os.replace(temp, path)
    return path


class ExperimentRuntime:
    """One training run: trainer, task stream, metrics sink and checkpoint writer.

    Integrity failures halt the runtime and leave a forensic artifact under the
    run's ``forensics/`` directory instead of propagating.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_root: str | Path | None = None,
        *,
        tasks: Sequence[TaskDataset] | None = None,
    ) -> None:
        self.config = config
        self.config_hash = config_hash(config)
        self.run_id = run_id(self.config_hash, config.seed)
        self.paths = RuntimePaths(resolve_output_root(output_root), self.run_id)
        self.tasks = list(tasks) if tasks is not None else load_dataset(config.dataset, config)
        self.stream = TaskStream(self.tasks)
        self.events = EventBus()
        self.trainer = TripleTrainer(config, data_dim(self.tasks), seeded_random(config.seed), events=self.events)
        self.checkpoints: list[Path] = []
        self.halted = False
        self.last_forensic_path: str | None = None
        self.events.subscribe(self._on_epoch_complete, event_type=TrainingEventType.EPOCH_COMPLETE)
        self.events.subscribe(self._on_task_complete, event_type=TrainingEventType.TASK_COMPLETE)

    # event sinks

    def _on_epoch_complete(self, event: TrainingEvent) -> None:
        if event.scope != EVENT_SCOPE:
            return
        write_metrics_csv(self.trainer.metrics, self.paths.metrics_path)
        if self.config.checkpoint_every_epoch:
            self.write_checkpoint(event.task, event.epoch)

    def _on_task_complete(self, event: TrainingEvent) -> None:
        if event.scope != EVENT_SCOPE:
            return
        self.write_checkpoint(event.task)
        write_task_accuracy_csv(self.trainer.task_metrics, self.paths.task_metrics_path)

    # checkpoints

    def write_checkpoint(self, task: int, epoch: int | None = None) -> Path:
        arrays, meta = self.trainer.export_state()
        checkpoint = Checkpoint(
            config_hash=self.config_hash,
            seed=self.config.seed,
            task=task,
            epoch=self.trainer.completed_epochs,
            arrays=arrays,
            state={
                "trainer": meta,
                "released": [t for t in self.stream.task_ids if self.stream.is_released(t)],
            },
            config=config_to_dict(self.config),
        )
        path = save_checkpoint(self.paths.checkpoint_path(task, epoch), checkpoint)
        self.checkpoints.append(path)
        logger.info("checkpoint written: %s", path.name)
        self.events.publish(
            TrainingEvent(
                RUNTIME_SCOPE,
                TrainingEventType.CHECKPOINT_WRITTEN,
                task,
                checkpoint.epoch,
                {"path": str(path)},
            )
        )
        return path

    def resume(self, path: str | Path) -> None:
        checkpoint = load_checkpoint(Path(path))
        if checkpoint.config_hash != self.config_hash:
            raise CheckpointMismatchError(
                f"checkpoint {path} was written for config {checkpoint.config_hash[:12]}, "
                f"not {self.config_hash[:12]}"
            )
        self.trainer.restore_state(checkpoint.arrays, checkpoint.state["trainer"])
        for task in checkpoint.state["released"]:
            self.stream.release(int(task))
        logger.info(
            "resumed %s at task %d after epoch %d", self.run_id, checkpoint.task, checkpoint.epoch
        )

    def next_task(self) -> int:
        replay = self.trainer.replay
        return replay.t if self.trainer.task_open else replay.t + 1

    # run

    def run(self) -> RunResult:
        if self.halted:
            return RunResult(
                False,
                f"runtime halted after integrity failure; forensic={self.last_forensic_path}",
                self.paths.run_dir,
                forensic_path=self.last_forensic_path,
            )
        try:
            write_manifest(self.paths.manifest_path, self.config, self.config_hash, self.run_id)
            for task_id in self.stream.task_ids:
                if task_id < self.next_task():
                    continue
                self.trainer.train_task(self.stream, task_id)
            outputs = self._finalize()
        except EngineIntegrityError as exc:
            return self._halt(exc.artifact, f"integrity failure: {exc}")
        except Exception as exc:
            artifact = build_forensic_artifact(
                engine_scope=RUNTIME_SCOPE,
                error_code="UNHANDLED_RUNTIME_EXCEPTION",
                message=str(exc),
                state_snapshot={
                    "task": self.trainer.replay.t,
                    "epoch": self.trainer.completed_epochs,
                    "task_open": self.trainer.task_open,
                },
                context={"config_hash": self.config_hash, "exception_type": type(exc).__name__},
                identifiers={"run_id": self.run_id, "seed": str(self.config.seed)},
                causal_fragment=["ExperimentRuntime.run", type(exc).__name__],
            )
            return self._halt(artifact, f"run aborted: {type(exc).__name__}: {exc}")
        final = self.trainer.metrics[-1] if self.trainer.metrics else None
        return RunResult(True, f"run {self.run_id} complete", self.paths.run_dir, outputs, final=final)

    def _halt(self, artifact: ForensicArtifact, message: str) -> RunResult:
        self.last_forensic_path = str(persist_forensic_artifact(artifact, self.paths.forensic_dir))
        self.halted = True
        logger.error("%s (forensic=%s)", message, self.last_forensic_path)
        return RunResult(False, message, self.paths.run_dir, forensic_path=self.last_forensic_path)

    def _finalize(self) -> list[Path]:
        trainer = self.trainer
        outputs = [
            self.paths.manifest_path,
            write_metrics_csv(trainer.metrics, self.paths.metrics_path),
            write_task_accuracy_csv(trainer.task_metrics, self.paths.task_metrics_path),
            *self.checkpoints,
        ]
        AnalyticsStore(self.paths.duckdb_path).record_training(self.run_id, trainer.metrics, trainer.task_metrics)
        final = trainer.metrics[-1] if trainer.metrics else None
        self.events.publish(
            TrainingEvent(
                RUNTIME_SCOPE,
                TrainingEventType.RUN_COMPLETE,
                trainer.replay.t,
                trainer.completed_epochs,
                {"run_id": self.run_id, "a_t": None, **(asdict(final) if final is not None else {})},
            )
        )
        logger.info("run %s complete: A_%d=%.2f", self.run_id, trainer.replay.t, final.a_t if final else 0.0)
        return outputs


def run_experiment(
    config: ExperimentConfig,
    output_root: str | Path | None = None,
    *,
    resume: str | Path | None = None,
    tasks: Sequence[TaskDataset] | None = None,
) -> RunResult:
    runtime = ExperimentRuntime(config, output_root, tasks=tasks)
    if resume is not None:
        runtime.resume(resume)
    return runtime.run()


def evaluate_checkpoint(path: str | Path, *, tasks: Sequence[TaskDataset] | None = None) -> AccuracyReport:
    """Single-head accuracy of a checkpoint on the test sets of every task it has seen."""
    checkpoint = load_checkpoint(Path(path))
    config = config_from_mapping(checkpoint.config, str(path))
    tasks = list(tasks) if tasks is not None else load_dataset(config.dataset, config)
    trainer = TripleTrainer(config, data_dim(tasks), seeded_random(config.seed))
    trainer.restore_state(checkpoint.arrays, checkpoint.state["trainer"])
    last = trainer.replay.t
    if last < 1:
        raise ReplayProtocolError(f"checkpoint {path} holds no trained task")
    test = trainer.union_test_set(TaskStream(tasks), last)
    return average_accuracy(trainer.model.critic, trainer.model.classifier, test, last)


def write_evaluation(report: AccuracyReport, path: Path) -> Path:
    frame = pd.DataFrame(
        [(report.task, report.a_t, report.acc_dprime, report.acc_c, report.acc_ensemble, report.sample_count)],
        columns=["task", "A_t", "acc_Dprime", "acc_C", "acc_ensemble", "samples"],
    )
    return write_frame(frame, path)
