from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence
import time

import structlog

from core.bounds import evaluate_bounds, speed_profile
from core.config import SolverConfig
from core.current_decomposition import ActionBreakdown, accumulate_actions
from core.errors import SpeedLimitError
from core.linear_langevin import GaussianState, LinearLangevinSystem, MomentTrajectory, propagate_moments
from data.models import BoundKind, BoundReport, ForceRegime

logger = structlog.get_logger()


@dataclass(frozen=True, eq=False)
class PipelineResult:
    trajectory: MomentTrajectory
    breakdown: ActionBreakdown
    reports: list[BoundReport] = field(default_factory=list)
    speed_reports: list[BoundReport] = field(default_factory=list)
    execution_time: float = 0.0

    @property
    def all_satisfied(self) -> bool:
        return all(r.satisfied for r in self.reports) and all(r.satisfied for r in self.speed_reports)


def execute_pipeline(
    system: LinearLangevinSystem,
    initial: GaussianState,
    kinds: Iterable[BoundKind] = (),
    regime: ForceRegime = ForceRegime.GENERAL,
    alpha: Optional[Sequence[float]] = None,
    speed_times: Iterable[float] = (),
    config: Optional[SolverConfig] = None,
) -> PipelineResult:
    """
    Propagate moments, accumulate the action functionals, then audit bounds.

    Errors are logged with the failing stage and re-raised unchanged.
    """
    config = config or SolverConfig()
    start_time = time.time()
    logger.info("pipeline_started", family=system.family, steps=config.steps, horizon=system.horizon)

    stage = "propagate"
    try:
        trajectory = propagate_moments(system, initial, config.steps, config)
        stage = "accumulate"
        breakdown = accumulate_actions(trajectory, config)
        stage = "bounds"
        reports = evaluate_bounds(kinds, trajectory, breakdown, regime, alpha, config)
        stage = "speed"
        speed_reports = speed_profile(trajectory, speed_times, config=config)
    except SpeedLimitError as e:
        logger.error("pipeline_failed", stage=stage, error=str(e), error_type=type(e).__name__)
        raise

    execution_time = time.time() - start_time
    logger.info(
        "pipeline_completed",
        execution_time=execution_time,
        bounds=len(reports),
        violated=sum(not r.satisfied for r in reports),
        Sigma_kB=breakdown.Sigma / system.k_B,
    )
    return PipelineResult(trajectory, breakdown, reports, speed_reports, execution_time)
