"""
Evaluation of the speed-limit inequalities on a computed trajectory.

Every report is oriented so that the inequality holds when lhs >= rhs, and
carries the intermediate terms it was assembled from. Regime-specific bounds
are only evaluated after the declared force regime has been verified against
the drift decomposition.
"""

from functools import cached_property
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import structlog

from core.config import SolverConfig
from core.current_decomposition import (
    ActionBreakdown,
    action_rates,
    force_rows,
    rate_profile,
    time_integral,
)
from core.errors import ApplicabilityError, ConfigurationError, NumericalError
from core.linear_langevin import GaussianState, LinearLangevinSystem, MobilityMatrix, MomentTrajectory
from core.wasserstein import marginal_coarse_action, marginal_full_action, w2_marginal_1d, w2_weighted
from data.models import BoundKind, BoundReport, ForceRegime

logger = structlog.get_logger()

UNDERDAMPED_ONLY = {
    BoundKind.CONTROL_EFFORT,
    BoundKind.KHOD_X,
    BoundKind.KHOD2_V,
    BoundKind.TIGHT_FREV0,
    BoundKind.MARGV_FREV0,
    BoundKind.SIGMA_UPPER_A,
    BoundKind.SIGMA_UPPER_B,
    BoundKind.SIMIL_FIRR0,
    BoundKind.MARGX_FIRR0,
}

REQUIRED_REGIME = {
    BoundKind.TIGHT_FREV0: ForceRegime.F_REV_ZERO,
    BoundKind.MARGV_FREV0: ForceRegime.F_REV_ZERO,
    BoundKind.SIGMA_UPPER_A: ForceRegime.F_IRR_ZERO,
    BoundKind.SIGMA_UPPER_B: ForceRegime.F_IRR_ZERO,
    BoundKind.SIMIL_FIRR0: ForceRegime.F_IRR_ZERO,
    BoundKind.MARGX_FIRR0: ForceRegime.F_IRR_ZERO,
}

ALPHA_KINDS = {BoundKind.ALPHA_FAMILY, BoundKind.TIGHT_FREV0, BoundKind.SIGMA_UPPER_A}

DEFAULT_ALPHA_X = 0.5


class TauBounds(NamedTuple):
    tau24: float
    tau25: float
    a: float
    b: float
    c: float
    d: float
    discriminant: float
    root: str


class ForceParity(NamedTuple):
    rev_zero: bool
    irr_zero: bool


def force_parity(system: LinearLangevinSystem, times: np.ndarray) -> ForceParity:
    """Whether the reversible / irreversible applied-force rows vanish on the whole grid."""
    As, cs = system.drift.evaluate_grid(times)
    f = force_rows(system, As, cs)
    scale = max(float(np.abs(f.row).max()), float(np.abs(f.offset).max()), 1e-300)

    def vanishes(row: np.ndarray, offset: np.ndarray) -> bool:
        return bool(np.all(np.abs(row) <= 1e-14 * scale) and np.all(np.abs(offset) <= 1e-14 * scale))

    return ForceParity(vanishes(f.rev_row, f.rev_offset), vanishes(f.irr_row, f.irr_offset))


def verify_regime(system: LinearLangevinSystem, regime: ForceRegime, times: np.ndarray) -> ForceParity:
    """Check a declared regime against the drift decomposition; raise when it does not hold."""
    parity = force_parity(system, times)
    if regime is ForceRegime.F_IRR_ZERO and not parity.irr_zero:
        raise ApplicabilityError(regime.value, "declared F_irr = 0 but the applied force has an irreversible part")
    if regime is ForceRegime.F_REV_ZERO and not parity.rev_zero:
        raise ApplicabilityError(regime.value, "declared F_rev = 0 but the applied force has a reversible part")
    return parity


def check_applicability(kind: BoundKind, system: LinearLangevinSystem, regime: ForceRegime) -> None:
    if kind in UNDERDAMPED_ONLY and system.family != "underdamped":
        raise ApplicabilityError(kind.value, f"requires the underdamped family, got '{system.family}'")
    if kind is BoundKind.RLC_CEC and system.family != "rlc":
        raise ApplicabilityError(kind.value, f"requires the RLC family, got '{system.family}'")
    if kind in (BoundKind.COARSE_X_CHAIN, BoundKind.COARSE_V_CHAIN) and system.n != 2:
        raise ApplicabilityError(kind.value, "coarse-graining chains are defined for two coordinates")
    required = REQUIRED_REGIME.get(kind)
    if required is not None and regime is not required:
        raise ApplicabilityError(kind.value, f"requires the declared regime '{required.value}', got '{regime.value}'")


def applicable_kinds(system: LinearLangevinSystem, regime: ForceRegime) -> list[BoundKind]:
    """All trajectory-level bounds that may be evaluated for this system and regime."""
    kinds = []
    for kind in BoundKind:
        if kind is BoundKind.SPEED_RATE:
            continue
        try:
            check_applicability(kind, system, regime)
        except ApplicabilityError:
            continue
        kinds.append(kind)
    return kinds


def effort_metric(system: LinearLangevinSystem) -> MobilityMatrix:
    """Weight N of the control-effort bounds: diag(gamma^2, m^2) or diag(1/R^2, 1)."""
    if system.family == "underdamped":
        return MobilityMatrix((system.params["gamma"] ** 2, system.params["m"] ** 2))
    if system.family == "rlc":
        return MobilityMatrix((1.0 / system.params["R"] ** 2, 1.0))
    raise ConfigurationError(f"no control-effort metric for family '{system.family}'")


class _BoundContext:
    """Lazily computed quantities shared by all bounds on one trajectory."""

    def __init__(self, trajectory: MomentTrajectory, breakdown: ActionBreakdown, config: SolverConfig):
        self.trajectory = trajectory
        self.breakdown = breakdown
        self.config = config
        self.system = trajectory.system
        self.tau = trajectory.horizon
        self._alpha_cache: dict[tuple[float, ...], tuple[float, float, float, float]] = {}

    @cached_property
    def g0(self) -> GaussianState:
        return self.trajectory.initial

    @cached_property
    def g1(self) -> GaussianState:
        return self.trajectory.final

    @cached_property
    def w2_M_sq(self) -> float:
        return w2_weighted(self.g0, self.g1, self.system.mobility) ** 2

    @cached_property
    def w2_N_sq(self) -> float:
        return w2_weighted(self.g0, self.g1, effort_metric(self.system)) ** 2

    def w2_coord_sq(self, coord: int) -> float:
        return w2_marginal_1d(self.g0, self.g1, coord) ** 2

    def coarse(self, coord: int, weighted: bool) -> float:
        return marginal_coarse_action(self.trajectory, coord, weighted, self.config.cond_max)

    def full(self, coord: int, weighted: bool) -> float:
        return marginal_full_action(self.trajectory, coord, weighted, self.config.cond_max)

    def alpha_actions(self, alpha: tuple[float, ...]) -> tuple[float, float, float, float]:
        """(Sigma_alpha, Upsilon_alpha, Phi_alpha, W2_{M_alpha}^2)."""
        if alpha not in self._alpha_cache:
            scaled = self.system.mobility.scaled(alpha)
            rates = rate_profile(self.trajectory, weight=scaled.matrix, cond_max=self.config.cond_max)
            times = self.trajectory.times
            self._alpha_cache[alpha] = (
                time_integral(rates.sigma, times),
                time_integral(rates.y, times),
                time_integral(rates.phi, times),
                w2_weighted(self.g0, self.g1, scaled) ** 2,
            )
        return self._alpha_cache[alpha]

    def underdamped_constants(self) -> tuple[float, float, float, float]:
        p = self.system.params
        return p["gamma"], p["m"], self.system.T, self.system.k_B

    def control_effort_rhs(self) -> tuple[float, float]:
        """(Fisher + Theta, Theta)."""
        bd = self.breakdown
        gamma, m, T, k_B = self.underdamped_constants()
        theta = self.w2_N_sq / self.tau + 2.0 * gamma * (
            bd.delta_E - T * bd.Sigma_sys - gamma * k_B * T * self.tau / m
        )
        return bd.fisher_integral + theta, theta

    def similarity_rhs(self) -> tuple[float, float]:
        """(gamma T Sigma_pu + Gamma, Gamma)."""
        bd = self.breakdown
        gamma, m, T, k_B = self.underdamped_constants()
        big_gamma = self.w2_N_sq / self.tau + gamma * (
            2.0 * bd.delta_E - T * bd.Sigma_sys - gamma * k_B * T * self.tau / m
        )
        return gamma * T * bd.Sigma_pu + big_gamma, big_gamma


def _alpha_vector(system: LinearLangevinSystem, alpha: Optional[Sequence[float]], kind: BoundKind) -> tuple[float, ...]:
    if kind is BoundKind.ALPHA_FAMILY:
        values = tuple(float(a) for a in (alpha if alpha is not None else (1.0,) * system.n))
    else:
        alpha_x = float(alpha[0]) if alpha is not None else DEFAULT_ALPHA_X
        values = (alpha_x,) + (1.0,) * (system.n - 1)
    if len(values) != system.n or any(a <= 0 for a in values):
        raise ConfigurationError(f"alpha must hold {system.n} strictly positive entries, got {values}")
    return values


def _alpha_params(alpha: tuple[float, ...]) -> dict[str, float]:
    names = ("alpha_x", "alpha_v") if len(alpha) == 2 else tuple(f"alpha_{i}" for i in range(len(alpha)))
    return dict(zip(names, alpha))


def _evaluate(kind: BoundKind, ctx: _BoundContext, alpha: Optional[Sequence[float]]) -> BoundReport:
    bd = ctx.breakdown
    tau = ctx.tau
    tol = ctx.config.tol_rel
    build = BoundReport.build

    if kind is BoundKind.MASTER:
        lhs = tau * (bd.Sigma + bd.Phi + bd.Upsilon)
        return build(
            kind, lhs, ctx.w2_M_sq, tol,
            scale=tau * (abs(bd.Sigma) + abs(bd.Phi) + abs(bd.Upsilon)),
            terms={
                "Sigma": bd.Sigma, "Phi": bd.Phi, "Upsilon": bd.Upsilon, "W2_M_sq": ctx.w2_M_sq,
                "half_form": 2.0 * tau * (bd.Sigma + bd.Upsilon),
            },
        )

    if kind is BoundKind.ALPHA_FAMILY:
        a = _alpha_vector(ctx.system, alpha, kind)
        s_a, y_a, p_a, w2_a = ctx.alpha_actions(a)
        diag = ctx.system.mobility.diagonal
        marginal_sum = sum(a[i] * diag[i] * ctx.w2_coord_sq(i) for i in range(ctx.system.n))
        return build(
            kind, tau * (y_a + p_a + s_a), w2_a, tol,
            scale=tau * (abs(s_a) + abs(y_a) + abs(p_a)),
            terms={"Sigma_alpha": s_a, "Upsilon_alpha": y_a, "Phi_alpha": p_a, "W2_Malpha_sq": w2_a,
                   "marginal_sum": marginal_sum},
            chain=[(w2_a, marginal_sum)],
            params=_alpha_params(a),
        )

    if kind is BoundKind.CONTROL_EFFORT:
        rhs, theta = ctx.control_effort_rhs()
        gamma, m, T, k_B = ctx.underdamped_constants()
        return build(
            kind, bd.control_effort, rhs, tol,
            scale=abs(bd.fisher_integral) + ctx.w2_N_sq / tau
            + 2.0 * gamma * (abs(bd.delta_E) + T * abs(bd.Sigma_sys) + gamma * k_B * T * tau / m),
            terms={"Theta": theta, "fisher_integral": bd.fisher_integral, "W2_N_sq": ctx.w2_N_sq,
                   "delta_E": bd.delta_E, "Sigma_sys": bd.Sigma_sys},
        )

    if kind in (BoundKind.COARSE_X_CHAIN, BoundKind.COARSE_V_CHAIN):
        coord = 0 if kind is BoundKind.COARSE_X_CHAIN else 1
        w2 = ctx.w2_coord_sq(coord)
        coarse = ctx.coarse(coord, weighted=False)
        full = ctx.full(coord, weighted=False)

        def ratio(x: float) -> float:
            if w2 == 0.0:
                return 0.0
            return w2 / x if x > 0.0 else float("inf")

        return build(
            kind, tau * coarse, w2, tol,
            terms={"tau": tau, "W2_sq": w2, "coarse_action": coarse, "full_action": full,
                   "w2_over_coarse": ratio(coarse), "w2_over_full": ratio(full)},
            chain=[(full, coarse)],
        )

    if kind is BoundKind.KHOD_X:
        gamma, m, T, k_B = ctx.underdamped_constants()
        transport = gamma * ctx.w2_coord_sq(0) / (T * tau)
        offset = gamma * k_B * tau / m
        rhs = transport + bd.Sigma_sys + bd.Sigma_pu - offset
        return build(
            kind, bd.Sigma, rhs, tol,
            scale=transport + abs(bd.Sigma_sys) + abs(bd.Sigma_pu) + offset + abs(bd.Sigma_res),
            terms={"transport": transport, "Sigma_sys": bd.Sigma_sys, "Sigma_pu": bd.Sigma_pu, "offset": offset},
        )

    if kind is BoundKind.KHOD2_V:
        gamma, m, T, _ = ctx.underdamped_constants()
        transport = m**2 * ctx.w2_coord_sq(1) / (gamma * T * tau)
        reversible = bd.rev_force_integral / (gamma * T)
        rhs = transport - reversible - bd.Phi
        return build(
            kind, bd.Sigma, rhs, tol,
            scale=transport + reversible + abs(bd.Phi),
            terms={"transport": transport, "reversible_force_action": reversible, "Phi": bd.Phi},
        )

    if kind is BoundKind.TIGHT_FREV0:
        a = _alpha_vector(ctx.system, alpha, kind)
        gamma, m, T, _ = ctx.underdamped_constants()
        _, _, _, w2_a = ctx.alpha_actions(a)
        kinetic = gamma * a[0] * bd.kinetic_integral / T
        rhs = w2_a / tau - kinetic
        return build(
            kind, bd.Sigma, rhs, tol, scale=w2_a / tau + kinetic,
            terms={"W2_Malpha_sq": w2_a, "kinetic_term": kinetic},
            params={"alpha_x": a[0]},
        )

    if kind is BoundKind.MARGV_FREV0:
        m_vv = ctx.system.mobility.diagonal[1]
        coarse = ctx.coarse(1, weighted=True)
        transport = m_vv * ctx.w2_coord_sq(1) / tau
        return build(
            kind, bd.Sigma, transport, tol,
            terms={"coarse_action": coarse, "transport": transport},
            chain=[(bd.Sigma, coarse), (coarse, transport)],
        )

    if kind is BoundKind.SIGMA_UPPER_A:
        a = _alpha_vector(ctx.system, alpha, kind)
        _, y_a, _, w2_a = ctx.alpha_actions(a)
        T = ctx.system.T
        B_a = 2.0 * bd.Sigma_sys - 2.0 * bd.delta_E / T - w2_a / tau
        return build(
            kind, y_a + B_a, bd.Sigma, tol,
            scale=abs(y_a) + 2.0 * abs(bd.Sigma_sys) + 2.0 * abs(bd.delta_E) / T + w2_a / tau,
            terms={"Upsilon_alpha": y_a, "B_alpha": B_a, "W2_Malpha_sq": w2_a},
            params={"alpha_x": a[0]},
        )

    if kind is BoundKind.SIGMA_UPPER_B:
        gamma, m, T, _ = ctx.underdamped_constants()
        transport = m**2 * ctx.w2_coord_sq(1) / (gamma * T * tau)
        B = 2.0 * bd.Sigma_sys - 2.0 * bd.delta_E / T - transport
        reversible = bd.rev_force_integral / (gamma * T)
        return build(
            kind, reversible + B, bd.Sigma, tol,
            scale=reversible + 2.0 * abs(bd.Sigma_sys) + 2.0 * abs(bd.delta_E) / T + transport,
            terms={"reversible_force_action": reversible, "B": B},
        )

    if kind is BoundKind.SIMIL_FIRR0:
        rhs, big_gamma = ctx.similarity_rhs()
        effort_rhs, _ = ctx.control_effort_rhs()
        gamma, m, T, k_B = ctx.underdamped_constants()
        return build(
            kind, bd.control_effort, rhs, tol,
            scale=ctx.w2_N_sq / tau + gamma * (2.0 * abs(bd.delta_E) + T * abs(bd.Sigma_sys) + gamma * k_B * T * tau / m),
            terms={"Gamma": big_gamma, "Sigma_pu": bd.Sigma_pu, "control_effort_rhs": effort_rhs},
        )

    if kind is BoundKind.MARGX_FIRR0:
        gamma, _, T, _ = ctx.underdamped_constants()
        coarse = ctx.coarse(0, weighted=True)
        transport = gamma * ctx.w2_coord_sq(0) / (T * tau)
        return build(
            kind, bd.Sigma, transport, tol,
            terms={"coarse_action": coarse, "transport": transport},
            chain=[(bd.Sigma, coarse), (coarse, transport)],
        )

    if kind is BoundKind.RLC_CEC:
        R, C = ctx.system.params["R"], ctx.system.params["C"]
        T, kT = ctx.system.T, ctx.system.kT
        B = 2.0 * bd.delta_E - T * bd.Sigma_sys - kT * tau / (R * C)
        rhs = ctx.w2_N_sq / tau + B / R
        return build(
            kind, bd.control_effort, rhs, tol,
            scale=ctx.w2_N_sq / tau + (2.0 * abs(bd.delta_E) + T * abs(bd.Sigma_sys) + kT * tau / (R * C)) / R,
            terms={"B": B, "W2_N_sq": ctx.w2_N_sq, "delta_E": bd.delta_E, "Sigma_sys": bd.Sigma_sys},
        )

    raise ConfigurationError(f"{kind.value} is not a trajectory-level bound; use speed_rate_check")


def evaluate_bounds(
    kinds: Iterable[BoundKind],
    trajectory: MomentTrajectory,
    breakdown: ActionBreakdown,
    regime: ForceRegime = ForceRegime.GENERAL,
    alpha: Optional[Sequence[float]] = None,
    config: Optional[SolverConfig] = None,
) -> list[BoundReport]:
    """Evaluate several bounds on one trajectory, sharing distances and actions."""
    config = config or SolverConfig()
    kinds = list(kinds)
    system = trajectory.system
    for kind in kinds:
        check_applicability(kind, system, regime)
    if regime is not ForceRegime.GENERAL:
        verify_regime(system, regime, trajectory.times)

    ctx = _BoundContext(trajectory, breakdown, config)
    reports = []
    for kind in kinds:
        report = _evaluate(kind, ctx, alpha)
        if not report.satisfied:
            logger.warning("bound_violated", kind=report.label, lhs=report.lhs, rhs=report.rhs, slack=report.slack)
        reports.append(report)
    logger.debug("bounds_evaluated", count=len(reports), family=system.family)
    return reports


def evaluate_bound(
    kind: BoundKind,
    trajectory: MomentTrajectory,
    breakdown: ActionBreakdown,
    regime: ForceRegime = ForceRegime.GENERAL,
    alpha: Optional[Sequence[float]] = None,
    config: Optional[SolverConfig] = None,
) -> BoundReport:
    return evaluate_bounds([kind], trajectory, breakdown, regime, alpha, config)[0]


def speed_rate_check(
    trajectory: MomentTrajectory,
    t: float,
    delta: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> BoundReport:
    """
    Finite-difference Wasserstein speed against sqrt(sigma + phi + y) at time t.

    lhs is the rate side, rhs the speed W_M(rho_t, rho_{t+delta}) / delta;
    delta is rounded to a whole number (>= 2) of grid steps.
    """
    config = config or SolverConfig()
    delta = config.speed_delta_fraction * trajectory.horizon if delta is None else delta
    j = int(round(delta / trajectory.step))
    if j < 2:
        raise ConfigurationError(f"speed window {delta:.3g} is shorter than two grid steps")
    k = trajectory.index_of(t)
    if k + j > trajectory.steps:
        raise ConfigurationError(f"speed window [{t}, {t + delta}] leaves the trajectory")
    delta = float(trajectory.times[k + j] - trajectory.times[k])

    system = trajectory.system
    state = trajectory.state(k)
    rates = action_rates(system, state, float(trajectory.times[k]), cond_max=config.cond_max)
    radicand = rates.total
    notes = []
    if radicand < 0.0:
        notes.append(f"negative radicand {radicand:.3g} clamped to zero")
        radicand = 0.0
    rate = float(np.sqrt(radicand))
    speed = w2_weighted(state, trajectory.state(k + j), system.mobility) / delta
    return BoundReport.build(
        BoundKind.SPEED_RATE, rate, speed, config.speed_tol,
        terms={"t": float(trajectory.times[k]), "delta": delta, "speed": speed, "rate": rate,
               "sigma_rate": rates.sigma_rate, "y_rate": rates.y_rate, "phi_rate": rates.phi_rate},
        params={"t": float(trajectory.times[k])},
        notes=notes,
    )


def speed_profile(
    trajectory: MomentTrajectory,
    times: Iterable[float],
    delta: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> list[BoundReport]:
    return [speed_rate_check(trajectory, t, delta, config) for t in times]


def tau_lower_bounds(
    breakdown: ActionBreakdown,
    endpoints: tuple[GaussianState, GaussianState],
    system: LinearLangevinSystem,
) -> TauBounds:
    """
    Transition-time lower bounds of the trap example.

    a tau^2 + b tau + c >= 0 with a = CE + gamma^2 k_B T/m, b = gamma T Sigma_sys - 2 gamma Delta E,
    c = -W2_N^2 gives tau24 (the nonnegative root); tau25 = sqrt(gamma W2_x^2 / (T EP)).
    """
    if system.family != "underdamped":
        raise ApplicabilityError("tau_lower_bounds", "requires the underdamped family")
    gamma, m = system.params["gamma"], system.params["m"]
    T, kT = system.T, system.kT
    g0, g1 = endpoints

    a = breakdown.control_effort_rate + gamma**2 * kT / m
    b = gamma * T * breakdown.Sigma_sys - 2.0 * gamma * breakdown.delta_E
    c = -(w2_weighted(g0, g1, effort_metric(system)) ** 2)
    if a <= 0.0:
        raise NumericalError(f"quadratic coefficient a = {a:.3g} must be positive; breakdown is corrupted")
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NumericalError(f"negative discriminant {disc:.3g} with a > 0 and c <= 0")
    root_disc = float(np.sqrt(disc))
    if b > 0.0:
        tau24 = -2.0 * c / (b + root_disc) if (b + root_disc) > 0.0 else 0.0
        root = "rationalized"
    else:
        tau24 = (-b + root_disc) / (2.0 * a)
        root = "direct"

    w2x_sq = w2_marginal_1d(g0, g1, 0) ** 2
    ep = breakdown.entropy_production_rate
    if w2x_sq == 0.0:
        d = 0.0
    elif ep <= 0.0:
        raise NumericalError(f"entropy production rate {ep:.3g} is not positive but the position marginal moved")
    else:
        d = gamma * w2x_sq / (T * ep)
    return TauBounds(tau24, float(np.sqrt(d)), a, b, c, d, disc, root)
