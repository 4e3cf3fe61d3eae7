from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from triad import __version__
from triad.contracts import ExperimentConfig, ValidationError
from triad.core import TriadError
from triad.data import load_dataset, parse_config, write_labeled_vector_dir
from triad.export import ExportService
from triad.simulation import (
    ABLATION_VARIANTS,
    evaluate_checkpoint,
    resolve_output_root,
    run_ablation,
    run_alignment_diagnostic,
    run_experiment,
    run_joint_head_diagnostic,
    write_ablation_outputs,
    write_evaluation,
)

logger = logging.getLogger(__name__)


def _float_list(raw: str) -> list[float]:
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{raw}'") from exc


def _int_list(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{raw}'") from exc


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def _cmd_train(args: argparse.Namespace) -> int:
    result = run_experiment(_load_config(args), args.output, resume=args.resume)
    print(result.message)
    if not result.success:
        print(f"forensic artifact: {result.forensic_path}", file=sys.stderr)
        return 1
    if result.final is not None:
        final = result.final
        print(
            f"task {final.task}: A={final.a_t:.2f} D'={final.acc_dprime:.2f} "
            f"C={final.acc_c:.2f} ensemble={final.acc_ensemble:.2f}"
        )
    for path in result.outputs:
        print(f"- {path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    report = evaluate_checkpoint(args.ckpt)
    print(
        f"task {report.task}: A={report.a_t:.2f} D'={report.acc_dprime:.2f} "
        f"C={report.acc_c:.2f} ensemble={report.acc_ensemble:.2f} (n={report.sample_count})"
    )
    if args.output is not None:
        path = write_evaluation(report, Path(args.output) / f"{Path(args.ckpt).stem}_eval.csv")
        print(f"- {path}")
    return 0


def _cmd_diagnose_fim(args: argparse.Namespace) -> int:
    reports, path = run_alignment_diagnostic(_load_config(args), args.output, lambdas=args.lambdas)
    for report in reports:
        print(f"lambda_c={report.lambda_c:g}: mean cosine {report.mean_cosine():.4f}")
    print(f"- {path}")
    return 0


def _cmd_diagnose_joint_head(args: argparse.Namespace) -> int:
    report, path = run_joint_head_diagnostic(_load_config(args), args.output)
    for row in report.rows:
        print(f"{row.group}: cosine {row.cosine:.4f} correlation {row.correlation:.4f}")
    print(f"- {path}")
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    rows = run_ablation(_load_config(args), args.seeds, args.variants)
    for path in write_ablation_outputs(rows, resolve_output_root(args.output)):
        print(f"- {path}")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    root = resolve_output_root(args.output)
    outputs = ExportService(root / "analytics.duckdb").export_required_datasets(root / "exports")
    print("Exported datasets:")
    for path in outputs:
        print(f"- {path}")
    return 0


def _cmd_write_dataset(args: argparse.Namespace) -> int:
    config = _load_config(args)
    target = write_labeled_vector_dir(load_dataset(config.dataset, config), args.target)
    print(f"dataset written to {target}; load it with dataset 'dir:{target}'")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triad",
        description="Triad: triple-network generative replay for class-incremental learning",
    )
    parser.add_argument("--version", action="version", version=f"triad {__version__}")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging verbosity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train over the configured task sequence")
    train.add_argument("--config", type=Path, required=True, help="experiment config (JSON)")
    train.add_argument("--seed", type=int, default=None, help="override the config seed")
    train.add_argument("--resume", type=Path, default=None, help="checkpoint to resume from")
    train.add_argument(
        "--output", type=Path, default=None, help="output root (default $TRIAD_OUTPUT_DIR or ./runs)"
    )
    train.set_defaults(handler=_cmd_train)

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint on every task it has seen")
    evaluate.add_argument("--ckpt", type=Path, required=True, help="checkpoint file")
    evaluate.add_argument("--output", type=Path, default=None, help="directory for the evaluation CSV")
    evaluate.set_defaults(handler=_cmd_eval)

    fim = sub.add_parser("diagnose-fim", help="real vs generated importance alignment over a λ_C sweep")
    fim.add_argument("--config", type=Path, required=True)
    fim.add_argument("--lambdas", type=_float_list, default=None, help="comma-separated λ_C values")
    fim.add_argument("--seed", type=int, default=None)
    fim.add_argument("--output", type=Path, default=None)
    fim.set_defaults(handler=_cmd_diagnose_fim)

    joint = sub.add_parser(
        "diagnose-joint-head", help="critic vs auxiliary head importance per trunk layer"
    )
    joint.add_argument("--config", type=Path, required=True)
    joint.add_argument("--seed", type=int, default=None)
    joint.add_argument("--output", type=Path, default=None)
    joint.set_defaults(handler=_cmd_diagnose_joint_head)

    ablate = sub.add_parser("ablate", help="consolidation ablation grid over seeds")
    ablate.add_argument("--config", type=Path, required=True)
    ablate.add_argument("--seeds", type=_int_list, default=[0, 1, 2], help="comma-separated seeds")
    ablate.add_argument(
        "--variants",
        type=lambda raw: [v for v in raw.split(",") if v],
        default=None,
        help=f"comma-separated subset of {', '.join(ABLATION_VARIANTS)}",
    )
    ablate.add_argument("--output", type=Path, default=None)
    ablate.set_defaults(handler=_cmd_ablate)

    export = sub.add_parser("export", help="export analytics marts to CSV and Parquet")
    export.add_argument("--output", type=Path, default=None, help="output root holding analytics.duckdb")
    export.set_defaults(handler=_cmd_export)

    dataset = sub.add_parser(
        "write-dataset", help="materialize the configured dataset as a vector directory"
    )
    dataset.add_argument("--config", type=Path, required=True)
    dataset.add_argument("--seed", type=int, default=None)
    dataset.add_argument("--target", type=Path, required=True)
    dataset.set_defaults(handler=_cmd_write_dataset)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return int(args.handler(args))
    except ValidationError as exc:
        for issue in exc.issues:
            print(f"config error [{issue.code}] {issue.message}", file=sys.stderr)
        return 2
    except (TriadError, FileNotFoundError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
