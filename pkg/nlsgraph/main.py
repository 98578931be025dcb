import argparse
import json
import logging
import sys
from datetime import datetime
from typing import Optional

import numpy as np
from pydantic import ValidationError

from nlsgraph.config import GNConfig, RunConfig, SolverConfig, settings
from nlsgraph.discrete import DiscretizationError
from nlsgraph.graph_io import GraphParseError
from nlsgraph.graph_topology import GraphValidationError
from nlsgraph.models import Command, TransformName
from nlsgraph.pipeline import EXIT_INVALID, EXIT_UNEXPECTED, run_command
from nlsgraph.report import load_record
from nlsgraph.solver import SolverError
from nlsgraph.transforms import TransformError

logger = logging.getLogger(__name__)

# Errors caused by the input rather than by the program
INPUT_ERRORS = (GraphParseError, GraphValidationError, DiscretizationError, SolverError, TransformError)


class RunState:
    """Tracks the task a run is working on, fed by the pipeline's status callback."""

    def __init__(self):
        self.started_at: Optional[datetime] = None
        self.current_task: str = ""

    def start(self):
        self.started_at = datetime.utcnow()
        self.current_task = "Starting..."

    def update(self, task: str):
        self.current_task = task
        logger.debug(task)

    def elapsed(self) -> float:
        return (datetime.utcnow() - self.started_at).total_seconds() if self.started_at else 0.0


def parse_mass_grid(text: str) -> list[float]:
    """`a:b:step` (both ends included) or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError("mass grid range must be start:stop:step with step > 0")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid mass grid {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlsgraph",
        description="Ground states of the quintic NLS energy on noncompact metric graphs",
    )
    parser.add_argument("command", nargs="?", choices=[c.value for c in Command])
    parser.add_argument("--graph", help="graph YAML file or fixture name")
    parser.add_argument("--mass", type=float)
    parser.add_argument("--mass-grid", type=parse_mass_grid, help="start:stop:step or m1,m2,...")
    parser.add_argument("--trunc-L", type=float, help="half-line truncation length")
    parser.add_argument("--step-h", type=float, help="mesh step")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", help="comma-separated subset of json,csv,plot")
    parser.add_argument("--transform", choices=[t.value for t in TransformName])
    parser.add_argument("--function", help="GraphFunction JSON file")
    parser.add_argument("--reattach", action="store_true", help="modified-gn: accept disconnecting paths")
    parser.add_argument("--full", action="store_true", help="selftest: include slow checks")
    parser.add_argument("--replay", help="re-run the configuration echoed in a record")
    parser.add_argument("--log-level", default=settings.log_level)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.replay:
        config = RunConfig.model_validate(load_record(args.replay)["config"])
        if args.out:
            config = config.model_copy(update={"out": args.out})
        return config
    if not args.command:
        raise ValueError("a command is required unless --replay is given")

    numeric = {}
    if args.step_h is not None:
        numeric["step_h"] = args.step_h
    if args.trunc_L is not None:
        numeric["trunc_L"] = args.trunc_L
    if args.seed is not None:
        numeric["seed"] = args.seed

    fields = {
        "command": args.command,
        "graph": args.graph,
        "mass": args.mass,
        "mass_grid": args.mass_grid,
        "transform": args.transform,
        "function": args.function,
        "reattach": args.reattach,
        "full": args.full,
        "solver": SolverConfig(**numeric),
        "gn": GNConfig(**numeric),
    }
    if args.out:
        fields["out"] = args.out
    if args.format:
        fields["formats"] = [f.strip() for f in args.format.split(",") if f.strip()]
    if args.workers is not None:
        fields["workers"] = args.workers
    return RunConfig(**fields)


def _summary(record: dict) -> str:
    result = record["result"]
    command = record["command"]
    if command == Command.CLASSIFY.value:
        return f"{result['graph']}: {result['summary']}"
    if command == Command.SOLVE.value:
        return f"{result['status']}: E={result['energy']['total']:.6g}, omega={result['omega']:.6g}, residual={result['residual']:.3g}"
    if command == Command.SCAN.value:
        return f"bracket={result['bracket']}, unbounded onset={result['unbounded_onset']}"
    if command == Command.GN.value:
        estimate = result["estimate"]
        return f"K_lower={estimate['K_lower']:.6f}, mu_upper={estimate['mu_upper']:.6f}"
    if command == Command.TRANSFORM.value:
        return f"{result['transform']}: {'passed' if result['passed'] else 'FAILED'}"
    return f"{result['passed']} checks passed, failed: {result['failed']}"


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # Configure logging
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        config = config_from_args(args)
    except (ValidationError, ValueError, OSError, KeyError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_INVALID

    state = RunState()
    state.start()
    try:
        record, code = run_command(config, status_callback=state.update)
    except INPUT_ERRORS as e:
        logger.error(f"{config.command.value} failed: {e}")
        return EXIT_INVALID
    except Exception as e:
        logger.exception(f"Unexpected error in {config.command.value}: {e}")
        return EXIT_UNEXPECTED

    logger.info(f"{config.command.value} finished in {state.elapsed():.1f}s with exit code {code}")
    print(_summary(record))
    if "json" not in config.formats:
        print(json.dumps(record["result"], default=str, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
