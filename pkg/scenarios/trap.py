"""
Particle in a time-varying harmonic trap (underdamped family).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core.errors import ConfigurationError
from core.linear_langevin import GaussianState, LinearLangevinSystem, equilibrium_state, underdamped_system
from data.models import ForceRegime
from scenarios.protocols import ScalarFn, scalar_protocol

K_B = 1.38e-23

PROTOCOLS = ("steering", "static", "ramp", "sine", "tabulated")


def trap_protocol_paper(t: float, gamma: float, k_B: float, T: float) -> float:
    """Stiffness q(t) = 4 k_B T / (2 - t)^2 + gamma / (2 - t); pole at t = 2."""
    if t < 0.0 or t >= 2.0:
        raise ConfigurationError(f"steering protocol is defined on [0, 2), got t = {t}")
    return 4.0 * k_B * T / (2.0 - t) ** 2 + gamma / (2.0 - t)


@dataclass(frozen=True)
class TrapScenario:
    """
    Trap experiment parameters in SI units.

    Defaults reproduce the worked example: m = 1e-11 kg, T = 295 K,
    tau = 1 s, gamma/m = 1e3 1/s and initial state N(0, I) on (x, v).
    `extra_friction` adds an applied velocity-dependent force -gamma_c v
    and `center_shift` drags the trap centre linearly from 0 to that value.
    """
    m: float = 1e-11
    gamma: float = 1e-8
    T: float = 295.0
    k_B: float = K_B
    tau: float = 1.0
    protocol: str = "steering"
    stiffness: float = 1.0
    amplitude: float = 0.0
    table_times: Optional[tuple[float, ...]] = None
    table_values: Optional[tuple[float, ...]] = None
    extra_friction: float = 0.0
    center_shift: float = 0.0
    start_at_equilibrium: bool = False
    initial_mean: tuple[float, float] = (0.0, 0.0)
    initial_cov: tuple[tuple[float, float], tuple[float, float]] = field(
        default=((1.0, 0.0), (0.0, 1.0))
    )

    def __post_init__(self):
        if self.m <= 0 or self.gamma <= 0 or self.T <= 0 or self.k_B <= 0 or self.tau <= 0:
            raise ConfigurationError("m, gamma, T, k_B and tau must all be positive")
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(f"unknown trap protocol '{self.protocol}', expected one of {PROTOCOLS}")
        if self.protocol == "steering" and self.tau >= 2.0:
            raise ConfigurationError(f"steering protocol has a pole at t = 2; tau = {self.tau} is not allowed")
        if self.extra_friction < 0:
            raise ConfigurationError("extra friction must be nonnegative")

    @property
    def gamma_over_m(self) -> float:
        return self.gamma / self.m

    @property
    def regime(self) -> ForceRegime:
        """A velocity-dependent applied force is the only source of F_irr."""
        return ForceRegime.F_IRR_ZERO if self.extra_friction == 0.0 else ForceRegime.GENERAL

    def stiffness_fn(self) -> ScalarFn:
        if self.protocol == "steering":
            gamma, k_B, T = self.gamma, self.k_B, self.T
            return lambda t: trap_protocol_paper(t, gamma, k_B, T)
        shape = "constant" if self.protocol == "static" else self.protocol
        return scalar_protocol(shape, self.stiffness, self.tau, self.amplitude, self.table_times, self.table_values)

    def system(self) -> LinearLangevinSystem:
        center = None
        if self.center_shift != 0.0:
            shift, tau = self.center_shift, self.tau
            center = lambda t: shift * t / tau  # noqa: E731
        return underdamped_system(
            m=self.m,
            gamma=self.gamma,
            k_B=self.k_B,
            T=self.T,
            stiffness=self.stiffness_fn(),
            horizon=self.tau,
            extra_friction=self.extra_friction,
            center=center,
            name=f"trap-{self.protocol}",
        )

    def initial_state(self, system: Optional[LinearLangevinSystem] = None) -> GaussianState:
        if self.start_at_equilibrium:
            return equilibrium_state(system or self.system(), 0.0)
        return GaussianState(np.array(self.initial_mean, dtype=float), np.array(self.initial_cov, dtype=float))
