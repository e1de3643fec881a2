"""
Transition-time lower bounds across friction regimes (gamma/m sweep).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np
import structlog

from core.bounds import evaluate_bounds, tau_lower_bounds
from core.config import SolverConfig
from core.current_decomposition import accumulate_actions
from core.errors import ApplicabilityError, SpeedLimitError
from core.linear_langevin import propagate_moments
from data.models import BoundKind, ForceRegime, SweepRow
from scenarios.trap import TrapScenario

logger = structlog.get_logger()

SWEEP_BOUNDS = (BoundKind.MASTER, BoundKind.CONTROL_EFFORT, BoundKind.KHOD_X)


def default_grid(points: int = 40, low: float = 1e-2, high: float = 1e4) -> np.ndarray:
    """Log-spaced gamma/m values in 1/s."""
    return np.logspace(math.log10(low), math.log10(high), points)


def steps_for(gamma_over_m: float, tau: float, base_steps: int) -> int:
    """Grid size that keeps RK4 well inside its stability region for the friction mode."""
    return max(base_steps, math.ceil(4.0 * gamma_over_m * tau))


def sweep_point(scenario: TrapScenario, gamma_over_m: float, config: SolverConfig) -> SweepRow:
    """One independent propagate -> accumulate -> bounds run; failures are recorded in the row."""
    point = replace(scenario, gamma=gamma_over_m * scenario.m)
    steps = steps_for(gamma_over_m, point.tau, config.steps)
    try:
        system = point.system()
        trajectory = propagate_moments(system, point.initial_state(system), steps, config)
        breakdown = accumulate_actions(trajectory, config)
        tau_bounds = tau_lower_bounds(breakdown, (trajectory.initial, trajectory.final), system)
        reports = evaluate_bounds(SWEEP_BOUNDS, trajectory, breakdown, point.regime, config=config)
    except SpeedLimitError as e:
        logger.warning("sweep_point_failed", gamma_over_m=gamma_over_m, error=str(e))
        return SweepRow(gamma_over_m=gamma_over_m, tau_actual=point.tau, steps=steps, error=str(e))

    return SweepRow(
        gamma_over_m=gamma_over_m,
        tau24=tau_bounds.tau24,
        tau25=tau_bounds.tau25,
        tau_actual=point.tau,
        tau_over_relax=gamma_over_m * point.tau,
        steps=steps,
        ordering_holds=tau_bounds.tau24 >= tau_bounds.tau25,
        bounds_satisfied=all(r.satisfied for r in reports),
        root=tau_bounds.root,
        breakdown=breakdown.as_dict(si=True),
    )


def figure1_sweep(
    scenario: TrapScenario,
    grid: Optional[Sequence[float]] = None,
    threads: int = 1,
    config: Optional[SolverConfig] = None,
) -> list[SweepRow]:
    """
    Rows (gamma/m, tau24, tau25, tau) for every grid value, in grid order.

    Points are independent, so the thread count never changes the values.
    """
    if scenario.regime is not ForceRegime.F_IRR_ZERO:
        raise ApplicabilityError("tau_lower_bounds", f"needs an even applied force, scenario regime is {scenario.regime.value}")
    config = config or SolverConfig()
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    logger.info("sweep_started", points=len(grid), threads=threads)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        rows = list(executor.map(lambda g: sweep_point(scenario, float(g), config), grid))

    failed = sum(not r.succeeded for r in rows)
    logger.info("sweep_completed", points=len(rows), failed=failed)
    return rows
