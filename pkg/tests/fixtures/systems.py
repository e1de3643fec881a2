"""
Shared factories for unit-scale systems used across the test suite.
"""

from dataclasses import replace

import numpy as np

from core.config import SolverConfig
from core.current_decomposition import accumulate_actions
from core.linear_langevin import (
    AffineDriftProtocol,
    DiffusionMatrix,
    GaussianState,
    LinearLangevinSystem,
    MobilityMatrix,
    ParitySignature,
    propagate_moments,
)
from scenarios.rlc import RlcScenario
from scenarios.trap import TrapScenario

FAST = SolverConfig(steps=2000)


def nondim_trap(**changes) -> TrapScenario:
    """m = gamma = k_B = T = tau = 1 with a stiffness ramp from 1 to 2."""
    base = TrapScenario(m=1.0, gamma=1.0, T=1.0, k_B=1.0, tau=1.0, protocol="ramp", stiffness=1.0, amplitude=1.0)
    return replace(base, **changes)


def nondim_rlc(**changes) -> RlcScenario:
    base = RlcScenario(R=1.0, C=1.0, L0=1.0, T=1.0, k_B=1.0, tau=1.0)
    return replace(base, **changes)


def constant_system(A, D, parity=(1, -1), c=(0.0, 0.0)) -> LinearLangevinSystem:
    """Time-independent system with k_B = T = 1 and mobility k_B / D_ii on noisy coordinates."""
    D = np.asarray(D, dtype=float)
    mobility = tuple(1.0 / d if d > 0 else 1.0 for d in np.diag(D))
    return LinearLangevinSystem(
        drift=AffineDriftProtocol.constant(np.asarray(A, dtype=float), np.asarray(c, dtype=float), 1.0),
        diffusion=DiffusionMatrix(D),
        parity=ParitySignature(tuple(parity)),
        mobility=MobilityMatrix(mobility),
        k_B=1.0,
        T=1.0,
    )


def run(scenario, config: SolverConfig = FAST):
    """(system, trajectory, breakdown) for a trap or RLC scenario."""
    system = scenario.system()
    trajectory = propagate_moments(system, scenario.initial_state(system), config.steps, config)
    return system, trajectory, accumulate_actions(trajectory, config)


def standard_state(n: int = 2) -> GaussianState:
    return GaussianState(np.zeros(n), np.eye(n))
