"""
Noisy RLC loop with a time-varying inductor.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import structlog

from core.bounds import evaluate_bound
from core.config import SolverConfig
from core.current_decomposition import ActionBreakdown, accumulate_actions
from core.errors import ConfigurationError
from core.linear_langevin import GaussianState, LinearLangevinSystem, MomentTrajectory, equilibrium_state, propagate_moments, rlc_system
from data.models import BoundKind, BoundReport, ForceRegime
from scenarios.protocols import SHAPES, ScalarFn, scalar_protocol
from scenarios.trap import K_B

logger = structlog.get_logger()


@dataclass(frozen=True)
class RlcScenario:
    """
    Circuit parameters in SI units; state is (phi, q).

    Defaults are desk-scale values (1 kOhm, 1 nF, 1 mH, 295 K, 1 ms) with the
    inductance ramped as L0 (1 + t / tau) from equilibrium.
    """
    R: float = 1e3
    C: float = 1e-9
    L0: float = 1e-3
    T: float = 295.0
    k_B: float = K_B
    tau: float = 1e-3
    protocol: str = "ramp"
    amplitude: float = 1.0
    table_times: Optional[tuple[float, ...]] = None
    table_values: Optional[tuple[float, ...]] = None
    start_at_equilibrium: bool = True
    initial_mean: tuple[float, float] = (0.0, 0.0)
    initial_cov: Optional[tuple[tuple[float, float], tuple[float, float]]] = None

    def __post_init__(self):
        if self.R <= 0 or self.C <= 0 or self.L0 <= 0 or self.T <= 0 or self.k_B <= 0 or self.tau <= 0:
            raise ConfigurationError("R, C, L0, T, k_B and tau must all be positive")
        if self.protocol not in SHAPES:
            raise ConfigurationError(f"unknown inductance protocol '{self.protocol}', expected one of {SHAPES}")
        if not self.start_at_equilibrium and self.initial_cov is None:
            raise ConfigurationError("an RLC scenario not starting at equilibrium needs an initial covariance")

    @property
    def regime(self) -> ForceRegime:
        return ForceRegime.F_IRR_ZERO

    def inductance_fn(self) -> ScalarFn:
        return scalar_protocol(self.protocol, self.L0, self.tau, self.amplitude, self.table_times, self.table_values)

    def system(self) -> LinearLangevinSystem:
        return rlc_system(self.R, self.C, self.k_B, self.T, self.inductance_fn(), self.tau, name=f"rlc-{self.protocol}")

    def initial_state(self, system: Optional[LinearLangevinSystem] = None) -> GaussianState:
        if self.start_at_equilibrium:
            return equilibrium_state(system or self.system(), 0.0)
        return GaussianState(np.array(self.initial_mean, dtype=float), np.array(self.initial_cov, dtype=float))


class RlcResult(NamedTuple):
    trajectory: MomentTrajectory
    breakdown: ActionBreakdown
    report: BoundReport


def rlc_experiment(scenario: RlcScenario, config: Optional[SolverConfig] = None) -> RlcResult:
    """Propagate the circuit, accumulate actions and audit the control-effort bound."""
    config = config or SolverConfig()
    system = scenario.system()
    trajectory = propagate_moments(system, scenario.initial_state(system), config.steps, config)
    breakdown = accumulate_actions(trajectory, config)
    report = evaluate_bound(BoundKind.RLC_CEC, trajectory, breakdown, scenario.regime, config=config)
    logger.info("rlc_experiment_completed", protocol=scenario.protocol, satisfied=report.satisfied, slack=report.slack)
    return RlcResult(trajectory, breakdown, report)
