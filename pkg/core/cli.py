"""
Command-line front end.

    speedlimits simulate --config run.toml --out out/
    speedlimits bounds   --config run.toml
    speedlimits fig1     --config fig1.toml --threads 8
    speedlimits rlc      --config rlc.toml
    speedlimits check    --seed 7

Exit codes: 0 success, 1 bound or invariant violation or numerical failure,
2 configuration error.
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

import structlog

from config.app_config import RuntimeSettings
from config.run_config import RunConfig, load_run_config
from core.bounds import applicable_kinds, tau_lower_bounds
from core.current_decomposition import accumulate_actions, rate_profile
from core.errors import ConfigurationError, SpeedLimitError
from core.execution import execute_pipeline
from core.linear_langevin import propagate_moments
from data.models import ForceRegime
from data.outputs import (
    atomic_write_text,
    bounds_jsonl,
    bounds_table,
    breakdown_csv,
    check_table,
    sweep_csv,
    trajectory_csv,
)
from monitoring.metrics import collect_run_metrics, configure_logging
from scenarios.rlc import rlc_experiment
from scenarios.sweep import figure1_sweep
from tools.invariant_suite import run_suites
from tools.plotting import render_sweep_svg

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2

SWEEP_SUCCESS_FRACTION = 0.9

STEERING_UNITS_NOTE = (
    "note: the steering protocol adds 4 k_B T / (2 - t)^2 and gamma / (2 - t) literally in SI units; "
    "the two terms carry different dimensions"
)


def _out_dir(config: RunConfig) -> Path:
    return Path(config.output.dir)


def _flag_protocol_units(config: RunConfig) -> None:
    if config.run.scenario == "trap" and config.trap.protocol == "steering":
        print(STEERING_UNITS_NOTE, file=sys.stderr)


def cmd_simulate(config: RunConfig) -> int:
    """Propagate moments and write the per-time trajectory plus the integrated breakdown."""
    solver = config.solver.to_solver_config()
    system, initial, _ = config.build_system()
    trajectory = propagate_moments(system, initial, solver.steps, solver)
    rates = rate_profile(trajectory, cond_max=solver.cond_max)
    breakdown = accumulate_actions(trajectory, solver)

    header = config.resolved()
    out = _out_dir(config)
    print(atomic_write_text(out / "trajectory.csv", trajectory_csv(trajectory, rates, header, config.output.si)))
    print(atomic_write_text(out / "breakdown.csv", breakdown_csv(breakdown, header, config.output.si)))
    return EXIT_OK


def cmd_bounds(config: RunConfig) -> int:
    """Audit the requested (or every applicable) bound on the configured scenario."""
    solver = config.solver.to_solver_config()
    system, initial, regime = config.build_system()
    kinds = config.bounds.kinds or applicable_kinds(system, regime)
    result = execute_pipeline(
        system,
        initial,
        kinds=kinds,
        regime=regime,
        alpha=config.bounds.alpha,
        speed_times=config.bounds.speed_times,
        config=solver,
    )

    header = config.resolved()
    out = _out_dir(config)
    reports = result.reports + result.speed_reports
    print(atomic_write_text(out / "bounds.jsonl", bounds_jsonl(reports, header)))
    print(atomic_write_text(out / "breakdown.csv", breakdown_csv(result.breakdown, header, config.output.si)))
    print(bounds_table(reports), end="")

    if system.family == "underdamped" and regime is ForceRegime.F_IRR_ZERO:
        trajectory = result.trajectory
        taus = tau_lower_bounds(result.breakdown, (trajectory.initial, trajectory.final), system)
        print(f"tau = {system.horizon:.6g}  tau24 = {taus.tau24:.6g}  tau25 = {taus.tau25:.6g}  ({taus.root} root)")
    elif system.family == "underdamped":
        print(f"tau24 and tau25 not reported: they need an even applied force, regime is {regime.value}")

    return EXIT_OK if result.all_satisfied else EXIT_VIOLATION


def cmd_fig1(config: RunConfig) -> int:
    """Sweep gamma/m for the trap scenario; write the CSV and the SVG plot."""
    solver = config.solver.to_solver_config()
    scenario = config.trap.build()
    rows = figure1_sweep(scenario, config.sweep.values(), config.run.threads, solver)

    header = config.resolved()
    out = _out_dir(config)
    print(atomic_write_text(out / "fig1.csv", sweep_csv(rows, header)))
    print(atomic_write_text(out / "fig1.svg", render_sweep_svg(rows)))

    failed = [r for r in rows if not r.succeeded]
    if failed:
        print(f"{len(failed)}/{len(rows)} sweep points failed; their bounds are NaN", file=sys.stderr)
        for row in failed:
            print(f"  gamma/m = {row.gamma_over_m:.6g}: {row.error}", file=sys.stderr)
    succeeded = len(rows) - len(failed)
    return EXIT_OK if succeeded >= SWEEP_SUCCESS_FRACTION * len(rows) else EXIT_VIOLATION


def cmd_rlc(config: RunConfig) -> int:
    """Run the RLC circuit and audit its control-effort bound."""
    solver = config.solver.to_solver_config()
    result = rlc_experiment(config.rlc.build(), solver)
    rates = rate_profile(result.trajectory, cond_max=solver.cond_max)

    header = config.resolved()
    out = _out_dir(config)
    si = config.output.si
    print(atomic_write_text(out / "rlc_trajectory.csv", trajectory_csv(result.trajectory, rates, header, si)))
    print(atomic_write_text(out / "rlc_breakdown.csv", breakdown_csv(result.breakdown, header, si)))
    print(atomic_write_text(out / "rlc_bounds.jsonl", bounds_jsonl([result.report], header)))
    print(bounds_table([result.report]), end="")
    return EXIT_OK if result.report.satisfied else EXIT_VIOLATION


def cmd_check(config: RunConfig) -> int:
    """Run the invariant suites and print a pass/fail table."""
    outcomes = run_suites(config.check.to_settings(config.run.seed))
    print(check_table(outcomes), end="")
    failed = [o for o in outcomes if not o.passed]
    for o in failed:
        logger.error("invariant_failed", suite=o.suite, name=o.name, detail=o.detail, worst=o.worst)
    return EXIT_OK if not failed else EXIT_VIOLATION


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "fig1": cmd_fig1,
    "rlc": cmd_rlc,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speedlimits",
        description="Wasserstein speed limits for linear Langevin systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", type=Path, help="TOML run configuration (defaults if omitted)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="worker threads for sweeps")
        p.add_argument("--si", action="store_true", help="write entropy-like columns in J/K instead of k_B")
        p.add_argument("--seed", type=int, help="seed for randomized checks and Monte Carlo")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and map errors onto exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    start_time = time.time()

    try:
        settings = RuntimeSettings.from_env()
        configure_logging(settings.log_level, settings.log_json)
        config = load_run_config(args.config).with_overrides(
            out=args.out if args.out is not None else (str(settings.out_dir) if settings.out_dir else None),
            threads=args.threads if args.threads is not None else settings.threads,
            si=args.si,
            seed=args.seed if args.seed is not None else settings.seed,
        )
        logger.info("command_started", command=args.command, scenario=config.run.scenario)
        if args.command in ("simulate", "bounds", "fig1"):
            _flag_protocol_units(config)
        code = COMMANDS[args.command](config)
    except ConfigurationError as e:
        logger.error("command_failed", command=args.command, error=str(e), error_type=type(e).__name__)
        print(f"configuration error: {e}", file=sys.stderr)
        code = EXIT_CONFIG
    except SpeedLimitError as e:
        logger.error("command_failed", command=args.command, error=str(e), error_type=type(e).__name__)
        print(f"numerical failure: {e}", file=sys.stderr)
        code = EXIT_VIOLATION
    except OSError as e:
        logger.error("output_failed", command=args.command, error=str(e))
        print(f"output error: {e}", file=sys.stderr)
        code = EXIT_VIOLATION

    collect_run_metrics(start_time)
    logger.info("command_finished", command=args.command, exit_code=code)
    return code
