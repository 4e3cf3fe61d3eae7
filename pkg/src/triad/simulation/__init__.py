from .ablation import ABLATION_VARIANTS, run_ablation, run_variant, variant_config, write_ablation_outputs
from .determinism import DeterminismHarness, fingerprint_run
from .diagnose import run_alignment_diagnostic, run_joint_head_diagnostic
from .runtime import (
    ENV_OUTPUT_DIR,
    ExperimentRuntime,
    RunResult,
    RuntimePaths,
    evaluate_checkpoint,
    resolve_output_root,
    run_experiment,
    write_evaluation,
    write_manifest,
)

__all__ = [
    "ABLATION_VARIANTS",
    "DeterminismHarness",
    "ENV_OUTPUT_DIR",
    "ExperimentRuntime",
    "RunResult",
    "RuntimePaths",
    "evaluate_checkpoint",
    "fingerprint_run",
    "resolve_output_root",
    "run_ablation",
    "run_alignment_diagnostic",
    "run_experiment",
    "run_joint_head_diagnostic",
    "run_variant",
    "variant_config",
    "write_ablation_outputs",
    "write_evaluation",
    "write_manifest",
]
