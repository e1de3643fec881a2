"""
Named invariant suites run by `speedlimits check`.

Each suite returns CheckOutcome records; a suite never raises for a failed
invariant, only for a broken configuration.
"""

from dataclasses import dataclass, replace
import math
from typing import Callable, Optional

import numpy as np
import structlog

from core.bounds import applicable_kinds, evaluate_bounds, speed_profile
from core.config import SolverConfig
from core.current_decomposition import (
    accumulate_actions,
    cross_term_identity,
    fisher_substitution,
    lambda_decomposition,
)
from core.errors import SpeedLimitError
from core.linear_langevin import (
    AffineDriftProtocol,
    DiffusionMatrix,
    GaussianState,
    LinearLangevinSystem,
    MobilityMatrix,
    ParitySignature,
    equilibrium_state,
    propagate_moments,
    reference_moments,
)
from core.wasserstein import w2_gaussian, w2_weighted
from data.models import CheckOutcome, ForceRegime
from scenarios.randomized import (
    random_free_particle,
    random_gaussian_state,
    random_rlc_scenario,
    random_trap_scenario,
)
from scenarios.rlc import RlcScenario
from scenarios.sweep import sweep_point
from scenarios.trap import TrapScenario
from tools.mc_oracle import McConfig, estimate_quadratic_integrals, simulate_paths, within_stderr
from tools.ot_grid_oracle import GridSpec, verify_closed_form

logger = structlog.get_logger()


@dataclass(frozen=True)
class CheckSettings:
    tol_rel: float = 1e-6
    seed: int = 0
    steps: int = 10_000
    random_traps: int = 50
    random_rlcs: int = 20
    random_pairs: int = 20
    metric_triples: int = 1000
    mc_paths: int = 10_000
    suites: tuple[str, ...] = ("moments", "bookkeeping", "wasserstein", "bounds", "speed", "mc")

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(steps=self.steps, tol_rel=self.tol_rel)


def _close(a: float, b: float, tol: float, *scale: float) -> tuple[bool, float]:
    """|a - b| <= tol * max(|a|, |b|, scale...); returns the pass flag and the relative error."""
    ref = max(abs(a), abs(b), *(abs(s) for s in scale))
    if ref == 0.0:
        return True, 0.0
    err = abs(a - b) / ref
    return err <= tol, err


def _nondim_trap(**changes) -> TrapScenario:
    base = TrapScenario(m=1.0, gamma=1.0, T=1.0, k_B=1.0, tau=1.0, protocol="ramp", stiffness=1.0, amplitude=1.0)
    return replace(base, **changes)


def suite_moments(settings: CheckSettings) -> list[CheckOutcome]:
    out = []
    static = _nondim_trap(protocol="static", start_at_equilibrium=True)
    system = static.system()
    traj = propagate_moments(system, static.initial_state(system), settings.steps, settings.solver)
    drift = float(np.abs(traj.covs - traj.covs[0]).max() / np.abs(traj.covs[0]).max())
    out.append(CheckOutcome(suite="moments", name="gibbs_state_is_stationary", passed=drift <= 1e-10, worst=drift))

    rng = np.random.default_rng(settings.seed)
    worst = 0.0
    for _ in range(10):
        A = rng.standard_normal((2, 2)) - 3.0 * np.eye(2)
        D = np.diag([0.0, rng.uniform(0.5, 2.0)])
        sys_ = _custom_system(A, D)
        S = equilibrium_state(sys_).cov
        residual = np.linalg.norm(A @ S + S @ A.T + 2.0 * D) / np.linalg.norm(2.0 * D)
        worst = max(worst, float(residual))
    out.append(CheckOutcome(suite="moments", name="lyapunov_residual", passed=worst <= 1e-10, worst=worst))

    ramp = _nondim_trap()
    system = ramp.system()
    initial = ramp.initial_state(system)
    traj = propagate_moments(system, initial, settings.steps, settings.solver)
    _, ref_covs = reference_moments(system, initial)
    err = float(np.abs(traj.final.cov - ref_covs[-1]).max() / np.abs(ref_covs[-1]).max())
    out.append(CheckOutcome(suite="moments", name="rk4_matches_reference", passed=err <= 1e-8, worst=err))

    smooth = _nondim_trap(center_shift=0.5)
    system = smooth.system()
    initial = smooth.initial_state(system)
    ref_means, ref_covs = reference_moments(system, initial)
    errors = []
    for steps in (20, 40):
        final = propagate_moments(system, initial, steps, settings.solver).final
        errors.append(max(np.abs(final.cov - ref_covs[-1]).max(), np.abs(final.mean - ref_means[-1]).max()))
    ratio = _refinement_ratio(errors[0], errors[1], 1e-14)
    out.append(CheckOutcome(suite="moments", name="rk4_fourth_order_convergence", passed=ratio >= 8.0, worst=ratio))
    return out


def _custom_system(A: np.ndarray, D: np.ndarray) -> LinearLangevinSystem:
    return LinearLangevinSystem(
        drift=AffineDriftProtocol.constant(A, np.zeros(2), 1.0),
        diffusion=DiffusionMatrix(D),
        parity=ParitySignature.underdamped(),
        mobility=MobilityMatrix((1.0, 1.0 / D[1, 1])),
        k_B=1.0,
        T=1.0,
    )


def suite_bookkeeping(settings: CheckSettings) -> list[CheckOutcome]:
    out = []
    tol = settings.tol_rel
    runs = {
        "trap": _nondim_trap(center_shift=0.5),
        "refrigerator": _nondim_trap(extra_friction=0.5),
    }
    for label, scenario in runs.items():
        system = scenario.system()
        traj = propagate_moments(system, scenario.initial_state(system), settings.steps, settings.solver)
        bd = accumulate_actions(traj, settings.solver)
        ok, err = _close(bd.Sigma, bd.Sigma_sys + bd.Sigma_res + bd.Sigma_pu, 100.0 * tol, bd.Sigma_sys, bd.Sigma_res)
        out.append(CheckOutcome(suite="bookkeeping", name=f"entropy_balance[{label}]", passed=ok, worst=err))

        fisher, rebuilt = fisher_substitution(traj, bd)
        ok, err = _close(fisher, rebuilt, tol)
        out.append(CheckOutcome(suite="bookkeeping", name=f"fisher_substitution[{label}]", passed=ok, worst=err))

        lam = lambda_decomposition(traj, bd)
        ok, err = _close(lam.total, lam.phi, tol, lam.lambda1, lam.lambda2, lam.lambda3)
        out.append(CheckOutcome(suite="bookkeeping", name=f"lambda_sum_equals_phi[{label}]", passed=ok, worst=err))

        if scenario.regime is ForceRegime.F_IRR_ZERO:
            phi, boundary = cross_term_identity(bd)
            ok, err = _close(phi, boundary, tol, bd.Sigma, bd.Sigma_sys)
            out.append(CheckOutcome(suite="bookkeeping", name=f"cross_term_identity[{label}]", passed=ok, worst=err))

    rlc = RlcScenario(R=1.0, C=1.0, L0=1.0, T=1.0, k_B=1.0, tau=1.0)
    system = rlc.system()
    traj = propagate_moments(system, rlc.initial_state(system), settings.steps, settings.solver)
    bd = accumulate_actions(traj, settings.solver)
    phi, boundary = cross_term_identity(bd)
    ok, err = _close(phi, boundary, tol, bd.Sigma, bd.Sigma_sys)
    out.append(CheckOutcome(suite="bookkeeping", name="cross_term_identity[rlc]", passed=ok, worst=err))

    refined = _nondim_trap(center_shift=0.5)
    system = refined.system()
    gaps = []
    for steps in (20, 40, 80):
        bd = accumulate_actions(propagate_moments(system, refined.initial_state(system), steps, settings.solver), settings.solver)
        gaps.append(abs(bd.bookkeeping_gap) / max(abs(bd.Sigma), abs(bd.Sigma_sys), abs(bd.Sigma_res)))
    ratio = min(_refinement_ratio(gaps[0], gaps[1]), _refinement_ratio(gaps[1], gaps[2]))
    out.append(CheckOutcome(suite="bookkeeping", name="entropy_balance_converges", passed=ratio >= 3.5, worst=ratio))
    return out


def _refinement_ratio(coarse: float, fine: float, noise: float = 1e-13) -> float:
    """Error reduction when the step halves; a fine error at roundoff level counts as converged."""
    if fine <= noise:
        return float("inf")
    return coarse / fine


def suite_wasserstein(settings: CheckSettings) -> list[CheckOutcome]:
    out = []
    rng = np.random.default_rng(settings.seed + 1)
    M = _custom_system(-np.eye(2), np.diag([0.0, 1.0])).mobility.scaled((2.0, 0.5))
    sym_worst, tri_worst = 0.0, 0.0
    for _ in range(settings.metric_triples):
        a, b, c = (random_gaussian_state(rng) for _ in range(3))
        for dist in (w2_gaussian, lambda x, y: w2_weighted(x, y, M)):
            sym_worst = max(sym_worst, abs(dist(a, b) - dist(b, a)))
            tri_worst = max(tri_worst, dist(a, c) - dist(a, b) - dist(b, c))
    out.append(CheckOutcome(suite="wasserstein", name="symmetry", passed=sym_worst == 0.0, worst=sym_worst))
    out.append(CheckOutcome(suite="wasserstein", name="triangle_inequality", passed=tri_worst <= 1e-9, worst=tri_worst))

    worst_1d, worst_2d = 0.0, 0.0
    for _ in range(settings.random_pairs):
        g0, g1 = random_gaussian_state(rng), random_gaussian_state(rng)
        worst_1d = max(worst_1d, verify_closed_form(g0, g1, spec=GridSpec(dimension=1, points=200)).relative_gap)
        worst_2d = max(worst_2d, verify_closed_form(g0, g1, spec=GridSpec(dimension=2, points=40)).relative_gap)
    endpoints = (GaussianState([0.0], [[1.0]]), GaussianState([0.0], [[0.5]]))
    worst_1d = max(worst_1d, verify_closed_form(*endpoints, spec=GridSpec(dimension=1, points=200)).relative_gap)
    out.append(CheckOutcome(suite="wasserstein", name="closed_form_vs_grid_1d", passed=worst_1d <= 0.02, worst=worst_1d))
    out.append(CheckOutcome(suite="wasserstein", name="closed_form_vs_grid_2d", passed=worst_2d <= 0.02, worst=worst_2d))

    gaps = [verify_closed_form(*endpoints, spec=GridSpec(dimension=1, points=p)).relative_gap for p in (50, 100, 200)]
    shrinking = gaps[0] > gaps[1] > gaps[2]
    out.append(CheckOutcome(suite="wasserstein", name="grid_gap_shrinks_under_refinement", passed=shrinking, worst=gaps[-1]))
    return out


def _audit(name: str, system: LinearLangevinSystem, initial: GaussianState, regime: ForceRegime,
           alpha: tuple[float, float], settings: CheckSettings) -> Optional[str]:
    """Evaluate every applicable bound; returns the first violated label, if any."""
    traj = propagate_moments(system, initial, settings.steps, settings.solver)
    bd = accumulate_actions(traj, settings.solver)
    reports = evaluate_bounds(applicable_kinds(system, regime), traj, bd, regime, alpha, settings.solver)
    for r in reports:
        if not r.satisfied:
            return f"{name}:{r.label} slack={r.slack:.3g}"
    return None


def suite_bounds(settings: CheckSettings) -> list[CheckOutcome]:
    rng = np.random.default_rng(settings.seed + 2)
    failures: list[str] = []
    cases = []
    for i in range(settings.random_traps):
        scenario = random_trap_scenario(rng, refrigerator=(i % 5 == 4))
        cases.append((f"trap{i}", scenario.system(), scenario.initial_state(), scenario.regime))
    for i in range(max(1, settings.random_traps // 10)):
        system, initial = random_free_particle(rng)
        cases.append((f"free{i}", system, initial, ForceRegime.F_REV_ZERO))
    for i in range(settings.random_rlcs):
        scenario = random_rlc_scenario(rng)
        cases.append((f"rlc{i}", scenario.system(), scenario.initial_state(), scenario.regime))

    for name, system, initial, regime in cases:
        alpha = (float(rng.uniform(0.05, 2.0)), float(rng.uniform(0.05, 2.0)))
        failure = _audit(name, system, initial, regime, alpha, settings)
        if failure:
            failures.append(failure)
    validity = CheckOutcome(
        suite="bounds",
        name="randomized_bound_validity",
        passed=not failures,
        detail="; ".join(failures[:5]) or f"{len(cases)} protocols",
        worst=float(len(failures)),
    )

    # the worked trap keeps tau24 >= tau25 at low friction and loses it once gamma/m passes about 2.9
    low, high = (sweep_point(TrapScenario(), g, settings.solver) for g in (1.0, 100.0))
    crossing = low.succeeded and high.succeeded and low.ordering_holds and not high.ordering_holds
    ordering = CheckOutcome(
        suite="bounds",
        name="tau_ordering_crosses_with_friction",
        passed=bool(crossing),
        detail=f"tau24-tau25 at gamma/m=1: {low.tau24 - low.tau25:.3g}, at 100: {high.tau24 - high.tau25:.3g}",
        worst=high.tau24 - high.tau25,
    )
    return [validity, ordering]


def suite_speed(settings: CheckSettings) -> list[CheckOutcome]:
    scenario = TrapScenario()
    system = scenario.system()
    traj = propagate_moments(system, scenario.initial_state(system), settings.steps, settings.solver)
    times = traj.times[np.linspace(0.05 * settings.steps, 0.95 * settings.steps, 20).astype(int)]
    reports = speed_profile(traj, times, delta=1e-3 * scenario.tau, config=settings.solver)
    worst = min(r.slack / max(r.rhs, 1e-300) for r in reports)
    return [CheckOutcome(suite="speed", name="speed_below_action_rate", passed=all(r.satisfied for r in reports), worst=worst)]


def _ballistic_system() -> LinearLangevinSystem:
    """Noiseless free flight: x' = v, v' = 0."""
    return LinearLangevinSystem(
        drift=AffineDriftProtocol.constant(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros(2), 1.0),
        diffusion=DiffusionMatrix(np.zeros((2, 2))),
        parity=ParitySignature.underdamped(),
        mobility=MobilityMatrix((1.0, 1.0)),
        k_B=1.0,
        T=1.0,
    )


def _agreement(name: str, estimate, exact, stderr) -> CheckOutcome:
    """Entrywise z-score check; entries with zero standard error must match exactly."""
    flags = [within_stderr(float(e), float(x), float(s))
             for e, x, s in zip(np.ravel(estimate), np.ravel(exact), np.ravel(stderr))]
    return CheckOutcome(suite="mc", name=name, passed=all(ok for ok, _ in flags), worst=max(w for _, w in flags))


def _mc_against_moments(label: str, system: LinearLangevinSystem, initial: GaussianState, dt: float,
                        settings: CheckSettings) -> list[CheckOutcome]:
    traj = propagate_moments(system, initial, settings.steps, settings.solver)
    bd = accumulate_actions(traj, settings.solver)
    endpoints_only = math.ceil(system.horizon / dt)
    config = McConfig(paths=settings.mc_paths, dt=dt, seed=settings.seed, record_every=endpoints_only)
    paths = simulate_paths(system, initial, config)
    estimates = estimate_quadratic_integrals(paths)
    out = [
        _agreement(f"{label}:terminal_mean_within_4se", paths.means[-1], traj.final.mean, paths.mean_stderr[-1]),
        _agreement(f"{label}:terminal_covariance_within_4se", paths.covs[-1], traj.final.cov, paths.cov_stderr[-1]),
    ]
    for name, exact in (("kinetic", bd.kinetic_integral), ("force", bd.control_effort)):
        est = estimates[name]
        out.append(_agreement(f"{label}:{name}_integral_within_4se", est.value, exact, est.stderr))
    return out


def suite_mc(settings: CheckSettings) -> list[CheckOutcome]:
    out = []
    trap = _nondim_trap(start_at_equilibrium=True)
    system = trap.system()
    out += _mc_against_moments("trap", system, trap.initial_state(system), 1e-3, settings)

    worked = TrapScenario()
    system = worked.system()
    out += _mc_against_moments("worked_trap", system, worked.initial_state(system), 1e-4, settings)

    rlc = RlcScenario(R=1.0, C=1.0, L0=1.0, T=1.0, k_B=1.0, tau=1.0)
    system = rlc.system()
    out += _mc_against_moments("rlc", system, rlc.initial_state(system), 1e-3, settings)

    # without noise every path follows the same straight line, so the jackknife error is exactly zero
    system = _ballistic_system()
    start = np.array([0.5, 2.0])
    speed = McConfig(paths=settings.mc_paths, dt=1e-2, seed=settings.seed, record_every=100,
                     observables={"kinetic": lambda t: (np.array([0.0, 1.0]), 0.0)})
    paths = simulate_paths(system, start, speed)
    kinetic = estimate_quadratic_integrals(paths)["kinetic"]
    out.append(_agreement("ballistic:terminal_mean_exact", paths.means[-1], [2.5, 2.0], paths.mean_stderr[-1]))
    out.append(_agreement("ballistic:terminal_covariance_exact", paths.covs[-1], np.zeros((2, 2)), paths.cov_stderr[-1]))
    out.append(_agreement("ballistic:kinetic_integral_exact", kinetic.value, 4.0, kinetic.stderr))
    return out


SUITES: dict[str, Callable[[CheckSettings], list[CheckOutcome]]] = {
    "moments": suite_moments,
    "bookkeeping": suite_bookkeeping,
    "wasserstein": suite_wasserstein,
    "bounds": suite_bounds,
    "speed": suite_speed,
    "mc": suite_mc,
}


def run_suites(settings: Optional[CheckSettings] = None) -> list[CheckOutcome]:
    """Run the selected suites; a suite that raises is recorded as one failed outcome."""
    settings = settings or CheckSettings()
    outcomes = []
    for name in settings.suites:
        logger.info("suite_started", suite=name)
        try:
            results = SUITES[name](settings)
        except SpeedLimitError as e:
            logger.error("suite_crashed", suite=name, error=str(e))
            results = [CheckOutcome(suite=name, name="suite_completed", passed=False, detail=str(e))]
        outcomes.extend(results)
        logger.info("suite_finished", suite=name, failed=sum(not o.passed for o in results))
    return outcomes
