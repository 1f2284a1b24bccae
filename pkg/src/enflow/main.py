"""
The main file of the enflow command line
"""

import argparse
import faulthandler
import logging
import os
import sys
import traceback
from collections.abc import Sequence
from pathlib import Path
from types import TracebackType

from enflow import commands
from enflow.config import LOG_ENV_VAR, Settings
from enflow.errors import ConfigError, EnflowError
from enflow.logger import configure_logging

EXIT_FAILURE: int = 2


def global_exception_handler(
    exc_type: type[BaseException],
    exc_value: BaseException,
    exc_traceback: TracebackType | None,
):
    """Handle uncaught exceptions globally."""
    logger = logging.getLogger("GlobalExceptionHandler")

    # Format the full traceback
    error_msg = "".join(traceback.format_exception(exc_type, exc_value, exc_traceback))

    # Log the exception
    logger.critical("Uncaught exception:\n%s", error_msg)

    # Call the default exception handler
    sys.__excepthook__(exc_type, exc_value, exc_traceback)


def parse_bool(value: str) -> bool:
    """true/false, yes/no, 1/0"""
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise argparse.ArgumentTypeError(f"Expected a boolean, got '{value}'")


def build_parser() -> argparse.ArgumentParser:
    """Subcommands gen, train, sample, certify, eval and ablate with shared flags"""
    common = argparse.ArgumentParser(add_help=False)
    _ = common.add_argument("--config", type=Path, help="JSON settings file")
    _ = common.add_argument("--seed", type=int)
    _ = common.add_argument("--out", type=Path, help="Output directory")
    _ = common.add_argument("--workers", type=int)
    _ = common.add_argument("--steps", type=int, help="Euler steps N")
    _ = common.add_argument("--amplitude", type=float, help="Guidance amplitude a")
    _ = common.add_argument("--mode", choices=("justfm", "ensemblecert"))
    _ = common.add_argument("--ensemble-size", type=int, help="EnsembleCert candidates M")
    _ = common.add_argument("--delta", type=float, help="Coverage threshold")
    _ = common.add_argument("--guided", type=parse_bool)
    _ = common.add_argument("--dataset", type=Path, help="Dataset file instead of OUT/dataset.jsonl")
    _ = common.add_argument("--checkpoint", type=Path)
    _ = common.add_argument("--generated", type=Path)

    parser = argparse.ArgumentParser(
        prog="enflow", description="Energy-guided flow matching for conformer ensembles"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "Generate the synthetic dataset"),
        ("train", "Jointly train the vector field and the energy model"),
        ("sample", "Sample conformer ensembles for the test molecules"),
        ("certify", "Predict ground states and score them"),
        ("eval", "Coverage and AMR of a generated file"),
        ("ablate", "Metrics over the step count and amplitude grid"),
    ):
        _ = subparsers.add_parser(name, parents=[common], help=help_text)
    return parser


def resolve_settings(args: argparse.Namespace) -> Settings:
    """Config file (or environment and defaults) with the given flags on top"""
    settings = Settings.load_from_file(args.config) if args.config is not None else Settings()
    return settings.with_overrides(
        seed=args.seed,
        out_dir=args.out,
        workers=args.workers,
        steps=args.steps,
        amplitude=args.amplitude,
        mode=args.mode,
        ensemble_size=args.ensemble_size,
        delta=args.delta,
        guided=args.guided,
    )


def run_command(settings: Settings, args: argparse.Namespace) -> None:
    """Dispatch to the pipeline step"""
    match args.command:
        case "gen":
            _ = commands.run_gen(settings)
        case "train":
            _ = commands.run_train(settings, args.dataset)
        case "sample":
            _ = commands.run_sample(settings, args.checkpoint, args.dataset)
        case "certify":
            _ = commands.run_certify(settings, args.checkpoint, args.dataset)
        case "eval":
            _ = commands.run_eval(settings, args.dataset, args.generated)
        case "ablate":
            _ = commands.run_ablation(settings, args.checkpoint, args.dataset)
        case _:
            raise ConfigError(f"Unknown command '{args.command}'")


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)

    # Enable faulthandler to catch segmentation faults
    if sys.stderr is not None:
        faulthandler.enable()

    # Set up global exception handler
    sys.excepthook = global_exception_handler

    configure_logging(os.getenv(LOG_ENV_VAR) or "info")
    logger = logging.getLogger("Main")
    try:
        settings = resolve_settings(args)
        settings.check()
        configure_logging(settings.log_level(), settings.out_path(settings.LOGGING_DIR))
        logger.debug("Running '%s' into %s", args.command, settings.OUT_DIR)
        run_command(settings, args)
    except FileNotFoundError as e:
        logger.error("Missing input: %s", e)
        return EXIT_FAILURE
    except EnflowError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
