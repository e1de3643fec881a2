"""
Run configuration: TOML files validated into pydantic models.

Sections: [run] [solver] [trap] [rlc] [custom] [sweep] [bounds] [check] [output].
See docs/CONFIG_GRAMMAR.md.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.config import SolverConfig
from core.errors import ConfigurationError
from core.linear_langevin import (
    AffineDriftProtocol,
    DiffusionMatrix,
    GaussianState,
    LinearLangevinSystem,
    MobilityMatrix,
    ParitySignature,
)
from data.models import BoundKind, ForceRegime
from scenarios.rlc import RlcScenario
from scenarios.trap import K_B, TrapScenario
from tools.invariant_suite import SUITES, CheckSettings

PRESETS_DIR = Path(__file__).parent / "presets"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunSection(_Section):
    scenario: Literal["trap", "rlc", "custom"] = "trap"
    name: str = "run"
    threads: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, lt=2**63)


class SolverSection(_Section):
    steps: int = Field(10_000, ge=2)
    tol_rel: float = Field(1e-6, gt=0)
    cond_max: float = Field(1e12, gt=1)
    eig_floor_rel: float = Field(1e-14, ge=0)
    speed_delta_fraction: float = Field(1e-3, gt=0, lt=1)
    speed_tol: float = Field(1e-3, ge=0)

    def to_solver_config(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class TrapSection(_Section):
    m: float = Field(1e-11, gt=0)
    gamma_over_m: float = Field(1e3, gt=0)
    T: float = Field(295.0, gt=0)
    k_B: float = Field(K_B, gt=0)
    tau: float = Field(1.0, gt=0)
    protocol: Literal["steering", "static", "ramp", "sine", "tabulated"] = "steering"
    stiffness: float = Field(1.0, gt=0)
    amplitude: float = 0.0
    table_times: Optional[list[float]] = None
    table_values: Optional[list[float]] = None
    extra_friction: float = Field(0.0, ge=0)
    center_shift: float = 0.0
    start_at_equilibrium: bool = False
    initial_mean: list[float] = Field(default_factory=lambda: [0.0, 0.0])
    initial_cov: list[list[float]] = Field(default_factory=lambda: [[1.0, 0.0], [0.0, 1.0]])

    @model_validator(mode="after")
    def protocol_is_regular(self) -> "TrapSection":
        if self.protocol == "steering" and self.tau >= 2.0:
            raise ValueError(f"steering protocol has a pole at t = 2; tau = {self.tau} is not allowed")
        return self

    def build(self) -> TrapScenario:
        return TrapScenario(
            m=self.m,
            gamma=self.gamma_over_m * self.m,
            T=self.T,
            k_B=self.k_B,
            tau=self.tau,
            protocol=self.protocol,
            stiffness=self.stiffness,
            amplitude=self.amplitude,
            table_times=tuple(self.table_times) if self.table_times else None,
            table_values=tuple(self.table_values) if self.table_values else None,
            extra_friction=self.extra_friction,
            center_shift=self.center_shift,
            start_at_equilibrium=self.start_at_equilibrium,
            initial_mean=tuple(self.initial_mean),
            initial_cov=tuple(tuple(r) for r in self.initial_cov),
        )


class RlcSection(_Section):
    R: float = Field(1e3, gt=0)
    C: float = Field(1e-9, gt=0)
    L0: float = Field(1e-3, gt=0)
    T: float = Field(295.0, gt=0)
    k_B: float = Field(K_B, gt=0)
    tau: float = Field(1e-3, gt=0)
    protocol: Literal["constant", "ramp", "sine", "tabulated"] = "ramp"
    amplitude: float = 1.0
    table_times: Optional[list[float]] = None
    table_values: Optional[list[float]] = None
    start_at_equilibrium: bool = True
    initial_mean: list[float] = Field(default_factory=lambda: [0.0, 0.0])
    initial_cov: Optional[list[list[float]]] = None

    def build(self) -> RlcScenario:
        return RlcScenario(
            R=self.R,
            C=self.C,
            L0=self.L0,
            T=self.T,
            k_B=self.k_B,
            tau=self.tau,
            protocol=self.protocol,
            amplitude=self.amplitude,
            table_times=tuple(self.table_times) if self.table_times else None,
            table_values=tuple(self.table_values) if self.table_values else None,
            start_at_equilibrium=self.start_at_equilibrium,
            initial_mean=tuple(self.initial_mean),
            initial_cov=tuple(tuple(r) for r in self.initial_cov) if self.initial_cov else None,
        )


class CustomSection(_Section):
    """A time-independent linear system given entry by entry."""
    A: list[list[float]]
    c: list[float]
    D: list[list[float]]
    parity: list[int]
    mobility: list[float]
    bath_drift: Optional[list[list[float]]] = None
    force_scale: float = 1.0
    storage: float = 1.0
    k_B: float = Field(1.0, gt=0)
    T: float = Field(1.0, gt=0)
    tau: float = Field(1.0, gt=0)
    initial_mean: list[float]
    initial_cov: list[list[float]]

    def build_system(self) -> LinearLangevinSystem:
        return LinearLangevinSystem(
            drift=AffineDriftProtocol.constant(np.array(self.A), np.array(self.c), self.tau, "custom"),
            diffusion=DiffusionMatrix(np.array(self.D, dtype=float)),
            parity=ParitySignature(tuple(self.parity)),
            mobility=MobilityMatrix(tuple(self.mobility)),
            k_B=self.k_B,
            T=self.T,
            family="custom",
            bath_drift=None if self.bath_drift is None else np.array(self.bath_drift, dtype=float),
            force_scale=self.force_scale,
            storage=self.storage,
        )

    def initial_state(self) -> GaussianState:
        return GaussianState(np.array(self.initial_mean), np.array(self.initial_cov))


class SweepSection(_Section):
    points: int = Field(40, ge=1)
    low: float = Field(1e-2, gt=0)
    high: float = Field(1e4, gt=0)
    grid: Optional[list[float]] = None

    @field_validator("grid")
    @classmethod
    def grid_is_positive(cls, grid):
        if grid is not None and (not grid or min(grid) <= 0):
            raise ValueError("sweep grid values must be positive")
        return grid

    def values(self) -> list[float]:
        if self.grid is not None:
            return list(self.grid)
        if self.points == 1:
            return [self.low]
        return list(np.logspace(np.log10(self.low), np.log10(self.high), self.points))


class BoundsSection(_Section):
    """`kinds` empty means every bound applicable to the scenario and regime."""
    kinds: list[BoundKind] = Field(default_factory=list)
    regime: Optional[ForceRegime] = None
    alpha: Optional[list[float]] = None
    speed_times: list[float] = Field(default_factory=list)

    @field_validator("alpha")
    @classmethod
    def alpha_is_positive(cls, alpha):
        if alpha is not None and any(a <= 0 for a in alpha):
            raise ValueError("alpha entries must be strictly positive")
        return alpha


class CheckSection(_Section):
    tol_rel: float = Field(1e-6, gt=0)
    steps: int = Field(10_000, ge=2)
    random_traps: int = Field(50, ge=0)
    random_rlcs: int = Field(20, ge=0)
    random_pairs: int = Field(20, ge=0)
    metric_triples: int = Field(1000, ge=0)
    mc_paths: int = Field(10_000, ge=1000)
    suites: list[str] = Field(default_factory=lambda: list(SUITES))

    @field_validator("suites")
    @classmethod
    def suites_exist(cls, suites):
        unknown = [s for s in suites if s not in SUITES]
        if unknown:
            raise ValueError(f"unknown suites {unknown}; available: {sorted(SUITES)}")
        return suites

    def to_settings(self, seed: int) -> CheckSettings:
        data = self.model_dump()
        data["suites"] = tuple(data["suites"])
        return CheckSettings(seed=seed, **data)


class OutputSection(_Section):
    dir: str = "out"
    si: bool = False


class RunConfig(_Section):
    run: RunSection = Field(default_factory=RunSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    trap: TrapSection = Field(default_factory=TrapSection)
    rlc: RlcSection = Field(default_factory=RlcSection)
    custom: Optional[CustomSection] = None
    sweep: SweepSection = Field(default_factory=SweepSection)
    bounds: BoundsSection = Field(default_factory=BoundsSection)
    check: CheckSection = Field(default_factory=CheckSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def custom_section_present(self) -> "RunConfig":
        if self.run.scenario == "custom" and self.custom is None:
            raise ValueError("scenario 'custom' needs a [custom] section")
        return self

    def build_system(self) -> tuple[LinearLangevinSystem, GaussianState, ForceRegime]:
        """The configured system, its initial state, and the declared force regime."""
        if self.run.scenario == "trap":
            scenario = self.trap.build()
            default_regime = scenario.regime
        elif self.run.scenario == "rlc":
            scenario = self.rlc.build()
            default_regime = scenario.regime
        else:
            system = self.custom.build_system()
            return system, self.custom.initial_state(), self.bounds.regime or ForceRegime.GENERAL
        system = scenario.system()
        return system, scenario.initial_state(system), self.bounds.regime or default_regime

    def resolved(self) -> dict:
        """Fully resolved configuration as plain data, for output headers."""
        return self.model_dump(mode="json", exclude_none=True)

    def with_overrides(
        self,
        out: Optional[str] = None,
        threads: Optional[int] = None,
        si: Optional[bool] = None,
        seed: Optional[int] = None,
    ) -> "RunConfig":
        """CLI flags take precedence over file values."""
        data = self.model_dump()
        if out is not None:
            data["output"]["dir"] = out
        if threads is not None:
            data["run"]["threads"] = threads
        if si:
            data["output"]["si"] = True
        if seed is not None:
            data["run"]["seed"] = seed
        return validate_run_config(data)


def validate_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid run configuration: {e}") from e


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """
    Load and validate a TOML run configuration; None gives all defaults.

    Raises:
        ConfigurationError: If the file is missing, unparsable or invalid
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid TOML: {e}") from e
    return validate_run_config(data)
