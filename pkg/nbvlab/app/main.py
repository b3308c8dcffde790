"""
nbvlab - next-best-view planning toolkit.
Command-line entry point: `python -m app.main <command> [flags]`.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Callable, Optional, Sequence

from app.commands import evaluate, export, gen_dataset, reconstruct, train
from app.core.architectures import DropoutStart, VARIANT_CONV_FILTERS
from app.core.config import settings
from app.core.errors import NbvError
from app.core.locking import output_lock
from app.schemas.run_config import RunConfig, load_config

logger = logging.getLogger(__name__)

COMMANDS = ("gen-dataset", "train", "reconstruct", "eval", "export")


def configure_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL or "INFO"),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbvlab", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file with flat dotted keys")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-dir")
    parser.add_argument("--planner", choices=["regression", "classification", "infogain"])
    parser.add_argument("--variant", choices=sorted(VARIANT_CONV_FILTERS))
    parser.add_argument("--dropout-start", choices=[d.value for d in DropoutStart])
    parser.add_argument("--scans", type=int, help="reconstruction stop criterion")
    parser.add_argument("--k", type=float, help="fixed scale factor for the regression planner")
    parser.add_argument("--compare", action="store_true", help="run every planner on each object")
    parser.add_argument("--verify", action="store_true", help="re-score the generated dataset")
    parser.add_argument("--dataset", help="dataset file (relative to the output directory)")
    parser.add_argument("--weights", help="regression weight file")
    parser.add_argument("--resume", help="continue training from this weight file")
    parser.add_argument("--task", choices=["regression", "classification"], help="training target")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--reports", nargs="+", help="report globs for eval")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Flag values as flat dotted config keys; unset flags leave the file values alone."""
    mapping = {
        "seed": "seed",
        "output_dir": "output_dir",
        "planner": "planner.name",
        "variant": "network.variant",
        "dropout_start": "network.dropout_start",
        "scans": "reconstruction.max_scans",
        "dataset": "dataset.path",
        "weights": "network.weights",
        "resume": "network.resume",
        "task": "training.task",
        "epochs": "training.epochs",
        "reports": "eval.reports",
    }
    overrides = {key: getattr(args, attr) for attr, key in mapping.items() if getattr(args, attr) is not None}
    if args.k is not None:
        overrides["planner.k"] = args.k
        overrides["planner.scale_mode"] = "fixed"
    if args.compare:
        overrides["reconstruction.compare"] = True
    if args.verify:
        overrides["dataset.verify"] = True
    return overrides


def _gen_dataset(config: RunConfig) -> str:
    summary = gen_dataset.run(config)
    lines = [f"dataset {summary.path}: {summary.samples} samples"]
    lines += [f"  {name}: {count}" for name, count in summary.per_object.items()]
    if summary.verified_fraction is not None:
        lines.append(f"verified: {100.0 * summary.verified_fraction:.1f}% of labels are the re-scored argmax")
    return "\n".join(lines)


def _train(config: RunConfig) -> str:
    result = train.run(config)
    last = result.log.epochs[-1]
    header = result.log.csv_header()
    return (
        f"weights {result.weights_path}, log {result.log_path}\n"
        f"epoch {last.epoch}: {header[1]}={last.train_loss:.6f} {header[2]}={last.val_loss:.6f} "
        f"{header[3]}={last.val_metric:.6f}"
    )


def _reconstruct(config: RunConfig) -> str:
    return "\n".join(f"report {path}" for path in reconstruct.run(config))


def _eval(config: RunConfig) -> str:
    return evaluate.run(config).as_text()


def _export(config: RunConfig) -> str:
    return "\n".join(str(p) for p in export.run(config))


HANDLERS: dict[str, Callable[[RunConfig], str]] = {
    "gen-dataset": _gen_dataset,
    "train": _train,
    "reconstruct": _reconstruct,
    "eval": _eval,
    "export": _export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        config = load_config(args.config, overrides_from_args(args))
        logger.info("Starting %s (seed %d, output %s)", args.command, config.seed, config.output_dir)
        with output_lock(config.output_dir):
            text = HANDLERS[args.command](config)
    except NbvError as exc:
        print(f"error[{exc.code}]: {exc.message}", file=sys.stderr)
        return exc.exit_code
    print(text)
    logger.info("Finished %s", args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
