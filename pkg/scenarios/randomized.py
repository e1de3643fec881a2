"""
Randomized admissible scenarios and Gaussian states for property sweeps.

All draws are nondimensional (m, gamma, k_B T of order one) so that a
fixed grid resolves every mode.
"""

import numpy as np

from core.linear_langevin import GaussianState, LinearLangevinSystem, underdamped_system
from scenarios.rlc import RlcScenario
from scenarios.trap import TrapScenario


def random_spd(rng: np.random.Generator, n: int, low: float = 0.2, high: float = 2.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues in [low, high]."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    S = (Q * rng.uniform(low, high, n)) @ Q.T
    return 0.5 * (S + S.T)


def random_gaussian_state(rng: np.random.Generator, n: int = 2, mean_scale: float = 1.0) -> GaussianState:
    return GaussianState(mean_scale * rng.standard_normal(n), random_spd(rng, n))


def random_trap_scenario(rng: np.random.Generator, refrigerator: bool = False) -> TrapScenario:
    """Smooth ramp or sine stiffness on a unit-scale particle; optional velocity-dependent force."""
    S0 = random_spd(rng, 2)
    return TrapScenario(
        m=float(rng.uniform(0.5, 2.0)),
        gamma=float(rng.uniform(0.3, 3.0)),
        T=1.0,
        k_B=1.0,
        tau=float(rng.uniform(0.5, 2.0)),
        protocol=str(rng.choice(["ramp", "sine"])),
        stiffness=float(rng.uniform(0.5, 3.0)),
        amplitude=float(rng.uniform(-0.5, 0.9)),
        extra_friction=float(rng.uniform(0.1, 1.0)) if refrigerator else 0.0,
        center_shift=float(rng.uniform(-1.0, 1.0)),
        initial_mean=tuple(float(x) for x in 0.5 * rng.standard_normal(2)),
        initial_cov=tuple(tuple(float(x) for x in row) for row in S0),
    )


def random_rlc_scenario(rng: np.random.Generator) -> RlcScenario:
    S0 = random_spd(rng, 2)
    return RlcScenario(
        R=float(rng.uniform(0.5, 2.0)),
        C=float(rng.uniform(0.5, 2.0)),
        L0=float(rng.uniform(0.5, 2.0)),
        T=1.0,
        k_B=1.0,
        tau=float(rng.uniform(0.5, 2.0)),
        protocol=str(rng.choice(["ramp", "sine"])),
        amplitude=float(rng.uniform(-0.5, 0.9)),
        start_at_equilibrium=False,
        initial_mean=tuple(float(x) for x in 0.5 * rng.standard_normal(2)),
        initial_cov=tuple(tuple(float(x) for x in row) for row in S0),
    )


def random_free_particle(rng: np.random.Generator) -> tuple[LinearLangevinSystem, GaussianState]:
    """Untrapped particle under an applied friction -gamma_c v only, so F_rev = 0."""
    m = float(rng.uniform(0.5, 2.0))
    system = underdamped_system(
        m=m,
        gamma=float(rng.uniform(0.3, 3.0)),
        k_B=1.0,
        T=1.0,
        stiffness=lambda t: 0.0,
        horizon=float(rng.uniform(0.5, 2.0)),
        extra_friction=float(rng.uniform(0.1, 1.0)),
        name="free-refrigerator",
    )
    return system, GaussianState(0.5 * rng.standard_normal(2), random_spd(rng, 2))
