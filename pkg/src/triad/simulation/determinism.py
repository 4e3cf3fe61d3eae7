from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Sequence

from triad.contracts import ExperimentConfig, TaskDataset
from triad.core import canonical_json
from triad.persistence import checkpoint_digest, load_checkpoint
from triad.simulation.runtime import ExperimentRuntime, RunResult

FINGERPRINTED_FILES = ("manifest.json", "metrics.csv", "metrics_by_task.csv")


def fingerprint_run(run_dir: Path) -> dict[str, str]:
    """SHA-256 of every report file plus the payload digest of every checkpoint."""
    prints: dict[str, str] = {}
    for name in FINGERPRINTED_FILES:
        path = run_dir / name
        if path.exists():
            prints[name] = hashlib.sha256(path.read_bytes()).hexdigest()
    for path in sorted((run_dir / "checkpoints").glob("*.ckpt")):
        checkpoint = load_checkpoint(path)
        prints[f"checkpoints/{path.name}"] = checkpoint_digest(
            checkpoint.arrays,
            {"state": canonical_json(checkpoint.state), "config": canonical_json(checkpoint.config)},
        )
    return prints


class DeterminismHarness:
    def __init__(self, config: ExperimentConfig, tasks: Sequence[TaskDataset] | None = None) -> None:
        self.config = config
        self.tasks = tasks

    def replay(self, root: Path) -> tuple[dict[str, str], dict[str, str]]:
        result_a = self._run(root / "replay_a")
        result_b = self._run(root / "replay_b")
        return fingerprint_run(result_a.run_dir), fingerprint_run(result_b.run_dir)

    def _run(self, root: Path) -> RunResult:
        result = ExperimentRuntime(self.config, root, tasks=self.tasks).run()
        if not result.success:
            raise RuntimeError(f"determinism run failed: {result.message}")
        return result
