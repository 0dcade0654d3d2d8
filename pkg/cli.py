#!/usr/bin/env python3
"""
mapoly command line

Every subcommand runs an experiment config (--config) or a shipped preset
(--preset) restricted to the analyses it names. Exit code 0 when every verdict
passes, 1 when any verdict fails, 2 on an execution error.
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import structlog

from core.config import VERSION, get_settings
from core.exceptions import ConfigError, MapolyError
from core.logging_config import setup_logging
from harness.models import ExperimentConfig, ExperimentStatus, ResultDocument
from harness.presets import list_presets, load_config, load_preset, parse_config, preset_names
from harness.runner import ExperimentEngine, write_result
from solver.io import write_solution

logger = structlog.get_logger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2

# subcommand -> (help, analysis kinds it runs; None = all)
SUBCOMMANDS: Dict[str, Tuple[str, Optional[Tuple[str, ...]]]] = {
    "solve": ("Solve the grid ladder and check it", ("refinement", "sandwich", "pin", "hessian-trend", "comparison")),
    "analyze-corner": ("Classify u12 at a corner", ("corner",)),
    "analyze-edge": ("Fit the singular edge coefficient", ("edge",)),
    "check-conditions": ("Evaluate the regularity conditions", ("geometry", "conditions")),
    "eigen": ("Cone eigenvalues and the Liouville gap", ("eigen",)),
    "construct": ("Build and certify sub-solutions and barriers", ("subsolution", "barrier")),
    "counterexample": ("Certify the non-smooth example", ("counterexample",)),
    "run-preset": ("Run every analysis of a config or preset; --preset all runs the suite", None),
}

DEFAULT_PRESETS = {"counterexample": "counterexample-profiles"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapoly", description="Monge-Ampere on polytopes: numerical laboratory")
    parser.add_argument("--version", action="version", version=f"mapoly {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, _) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="Experiment config (JSON)")
        p.add_argument("--preset", help="Shipped preset name, or 'all'")
        p.add_argument("--out", type=Path, help="Write config.json, result.json and CSV series under DIR/<id>")
        p.add_argument("--grid-h", type=float, dest="grid_h", help="Replace the grid ladder with one spacing")
        p.add_argument("--threads", type=int, help="Worker threads for batches")
        p.add_argument("--include-slow", action="store_true", help="With --preset all, include acceptance-scale presets")
    sub.add_parser("list-presets", help="List shipped presets")
    return parser


def apply_flags(config: ExperimentConfig, grid_h: Optional[float], threads: Optional[int]) -> ExperimentConfig:
    """Command-line flags win over the config's own settings block"""
    flags = {k: v for k, v in (("grid_h", grid_h), ("threads", threads)) if v is not None}
    if not flags:
        return config
    overrides = {"settings": {**config.settings, **flags}}
    if grid_h is not None and config.grids:
        overrides["grids"] = [grid_h]
    return parse_config(config.model_dump(mode="json"), overrides)


def load_configs(args: argparse.Namespace) -> List[ExperimentConfig]:
    if args.config is not None and args.preset is not None:
        raise ConfigError("give --config or --preset, not both")
    preset = args.preset or (None if args.config is not None else DEFAULT_PRESETS.get(args.command))
    if args.config is not None:
        configs = [load_config(args.config)]
    elif preset == "all":
        configs = [load_preset(name) for name in preset_names()]
        if not args.include_slow:
            configs = [c for c in configs if not c.slow]
    elif preset is not None:
        configs = [load_preset(preset)]
    else:
        raise ConfigError("no experiment given: use --config or --preset", {"command": args.command})
    return [apply_flags(c, args.grid_h, args.threads) for c in configs]


def exit_code(results: Sequence[ResultDocument]) -> int:
    if any(r.status == ExperimentStatus.FAILED for r in results):
        return EXIT_ERROR
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


def print_summary(result: ResultDocument) -> None:
    if result.status == ExperimentStatus.FAILED:
        print(f"[ERROR] {result.experiment_id}: {result.error_code}: {result.error_message}")
        return
    failed = len(result.failed_verdicts)
    tag = "PASS" if failed == 0 else "FAIL"
    total = result.timings_ms.get("total", 0.0)
    print(f"[{tag}] {result.experiment_id} ({len(result.verdicts)} verdicts, {failed} failed, {total:.0f} ms)")
    for v in result.verdicts:
        print(f"  {'ok  ' if v.passed else 'FAIL'} {v.name}: value={v.value} expected={v.expected}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()

    if args.command == "list-presets":
        for info in list_presets():
            print(f"{info.name:<26}{'slow' if info.slow else '':<6}{info.description}")
        return EXIT_PASS

    try:
        configs = load_configs(args)
    except MapolyError as e:
        logger.error("Cannot load experiment", error_code=e.code, error=e.message, context=e.context)
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_ERROR

    only = SUBCOMMANDS[args.command][1]
    settings = get_settings().merged({"threads": args.threads})
    engine = ExperimentEngine(settings)

    if len(configs) == 1:
        result, solutions = engine.execute(configs[0], only)
        results = [result]
        if args.out is not None:
            directory = write_result(result, args.out / result.experiment_id)
            if args.command == "solve":
                for sol in solutions:
                    write_solution(sol, directory / f"solution_h{sol.h:g}.csv")
    else:
        results = engine.run_batch(configs, settings.threads, only)
        if args.out is not None:
            for result in results:
                write_result(result, args.out / result.experiment_id)

    for result in results:
        print_summary(result)
    return exit_code(results)


if __name__ == "__main__":
    sys.exit(main())
