"""
Tests for the speed-limit inequalities, regime guards and transition-time bounds.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.bounds import (
    applicable_kinds,
    check_applicability,
    effort_metric,
    evaluate_bound,
    evaluate_bounds,
    force_parity,
    speed_profile,
    speed_rate_check,
    tau_lower_bounds,
    verify_regime,
)
from core.current_decomposition import accumulate_actions
from core.errors import ApplicabilityError, ConfigurationError
from core.linear_langevin import propagate_moments
from data.models import BoundKind, BoundReport, ForceRegime
from scenarios.randomized import random_free_particle, random_rlc_scenario, random_trap_scenario
from scenarios.rlc import RlcScenario
from scenarios.trap import TrapScenario
from tests.fixtures.systems import FAST, nondim_rlc, nondim_trap, run

FINE = FAST.with_overrides(steps=10_000)


@pytest.fixture(scope="module")
def worked_trap():
    """The worked trap example in SI units."""
    return run(TrapScenario(), FINE)


@pytest.fixture(scope="module")
def rlc_run():
    return run(RlcScenario(), FINE)


def test_report_orientation_and_tolerance():
    ok = BoundReport.build(BoundKind.MASTER, lhs=2.0, rhs=1.0, tol_rel=1e-6)
    assert ok.satisfied and ok.slack == 1.0
    within = BoundReport.build(BoundKind.MASTER, lhs=1.0 - 1e-9, rhs=1.0, tol_rel=1e-6)
    assert within.satisfied
    violated = BoundReport.build(BoundKind.MASTER, lhs=0.9, rhs=1.0, tol_rel=1e-6)
    assert not violated.satisfied
    broken_chain = BoundReport.build(BoundKind.MARGX_FIRR0, lhs=2.0, rhs=1.0, tol_rel=1e-6, chain=[(1.0, 1.5)])
    assert not broken_chain.satisfied


def test_summed_term_scale_does_not_widen_the_tolerance():
    report = BoundReport.build(BoundKind.MASTER, lhs=0.9, rhs=1.0, tol_rel=1e-3, scale=200.0)
    assert report.tolerance == pytest.approx(1e-3)
    assert report.scale == 200.0
    assert not report.satisfied
    chained = BoundReport.build(
        BoundKind.MARGX_FIRR0, lhs=2.0, rhs=1.0, tol_rel=1e-3, scale=1e6, chain=[(1.0, 1.01)]
    )
    assert not chained.satisfied


def test_absolute_floor_covers_roundoff_near_zero():
    report = BoundReport.build(BoundKind.KHOD_X, lhs=1e-20, rhs=2e-20, tol_rel=1e-6, scale=1.0)
    assert report.tolerance == pytest.approx(1e-12)
    assert report.satisfied
    bare = BoundReport.build(BoundKind.KHOD_X, lhs=1e-20, rhs=2e-20, tol_rel=1e-6)
    assert not bare.satisfied


def test_worked_trap_satisfies_every_applicable_bound(worked_trap):
    system, trajectory, bd = worked_trap
    regime = TrapScenario().regime
    assert regime is ForceRegime.F_IRR_ZERO
    kinds = applicable_kinds(system, regime)
    assert BoundKind.MARGV_FREV0 not in kinds
    assert BoundKind.RLC_CEC not in kinds
    reports = evaluate_bounds(kinds, trajectory, bd, regime)
    violated = [r.label for r in reports if not r.satisfied]
    assert not violated


def test_margv_on_trap_is_not_applicable(worked_trap):
    system, trajectory, bd = worked_trap
    with pytest.raises(ApplicabilityError, match="f_rev_zero") as info:
        evaluate_bound(BoundKind.MARGV_FREV0, trajectory, bd, ForceRegime.F_IRR_ZERO)
    assert info.value.kind == "MARGV_FREV0"


def test_declared_regime_is_verified(worked_trap):
    _, trajectory, bd = worked_trap
    with pytest.raises(ApplicabilityError, match="reversible part"):
        evaluate_bound(BoundKind.TIGHT_FREV0, trajectory, bd, ForceRegime.F_REV_ZERO)


def test_refrigerator_is_not_even():
    system, trajectory, bd = run(nondim_trap(extra_friction=0.5))
    parity = force_parity(system, trajectory.times)
    assert not parity.irr_zero
    with pytest.raises(ApplicabilityError):
        verify_regime(system, ForceRegime.F_IRR_ZERO, trajectory.times)


def test_free_particle_satisfies_odd_force_bounds():
    system, initial = random_free_particle(np.random.default_rng(3))
    trajectory = propagate_moments(system, initial, FAST.steps, FAST)
    bd = accumulate_actions(trajectory, FAST)
    assert force_parity(system, trajectory.times).rev_zero
    reports = evaluate_bounds(
        [BoundKind.TIGHT_FREV0, BoundKind.MARGV_FREV0], trajectory, bd, ForceRegime.F_REV_ZERO, alpha=(0.7,)
    )
    assert all(r.satisfied for r in reports)
    assert reports[0].params == {"alpha_x": 0.7}


def test_rlc_control_effort_bound(rlc_run):
    system, trajectory, bd = rlc_run
    report = evaluate_bound(BoundKind.RLC_CEC, trajectory, bd, ForceRegime.F_IRR_ZERO)
    assert report.satisfied
    assert {"B", "W2_N_sq"} <= set(report.terms)


def test_underdamped_bounds_reject_rlc(rlc_run):
    system, trajectory, bd = rlc_run
    with pytest.raises(ApplicabilityError, match="underdamped"):
        check_applicability(BoundKind.CONTROL_EFFORT, system, ForceRegime.GENERAL)
    with pytest.raises(ApplicabilityError):
        tau_lower_bounds(bd, (trajectory.initial, trajectory.final), system)
    assert effort_metric(system).diagonal == (1.0 / 1e3**2, 1.0)


def test_alpha_family_with_unit_weights_is_the_master_bound():
    _, trajectory, bd = run(nondim_trap(center_shift=0.5))
    master, family = evaluate_bounds([BoundKind.MASTER, BoundKind.ALPHA_FAMILY], trajectory, bd, alpha=(1.0, 1.0))
    assert family.lhs == pytest.approx(master.lhs, rel=1e-12)
    assert family.rhs == pytest.approx(master.rhs, rel=1e-12)
    assert family.satisfied and master.satisfied
    assert family.params == {"alpha_x": 1.0, "alpha_v": 1.0}


def test_alpha_must_be_positive():
    _, trajectory, bd = run(nondim_trap())
    with pytest.raises(ConfigurationError):
        evaluate_bound(BoundKind.ALPHA_FAMILY, trajectory, bd, alpha=(1.0, -1.0))


def test_coarse_graining_chains():
    _, trajectory, bd = run(nondim_trap(center_shift=0.5))
    reports = evaluate_bounds([BoundKind.COARSE_X_CHAIN, BoundKind.COARSE_V_CHAIN], trajectory, bd)
    for report in reports:
        assert report.satisfied
        assert report.terms["coarse_action"] <= report.terms["full_action"] * (1.0 + 1e-12)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=8, deadline=None)
def test_random_traps_satisfy_applicable_bounds(seed):
    rng = np.random.default_rng(seed)
    scenario = random_trap_scenario(rng, refrigerator=bool(seed % 2))
    system, trajectory, bd = run(scenario, FINE)
    alpha = (float(rng.uniform(0.05, 2.0)), float(rng.uniform(0.05, 2.0)))
    reports = evaluate_bounds(applicable_kinds(system, scenario.regime), trajectory, bd, scenario.regime, alpha)
    assert [r.label for r in reports if not r.satisfied] == []


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=5, deadline=None)
def test_random_circuits_satisfy_applicable_bounds(seed):
    scenario = random_rlc_scenario(np.random.default_rng(seed))
    system, trajectory, bd = run(scenario, FINE)
    reports = evaluate_bounds(applicable_kinds(system, scenario.regime), trajectory, bd, scenario.regime)
    assert BoundKind.RLC_CEC in [r.kind for r in reports]
    assert all(r.satisfied for r in reports)


def test_transition_time_bounds_on_worked_trap(worked_trap):
    system, trajectory, bd = worked_trap
    taus = tau_lower_bounds(bd, (trajectory.initial, trajectory.final), system)
    assert taus.a > 0.0
    assert taus.c <= 0.0
    assert 0.0 <= taus.tau24 <= system.horizon * (1.0 + 1e-6)
    assert 0.0 <= taus.tau25 <= system.horizon * (1.0 + 1e-6)
    assert taus.root in ("rationalized", "direct")
    terms = (taus.a * taus.tau24**2, taus.b * taus.tau24, taus.c)
    assert sum(terms) == pytest.approx(0.0, abs=1e-9 * max(abs(x) for x in terms))


def test_speed_never_exceeds_action_rate(worked_trap):
    _, trajectory, _ = worked_trap
    times = trajectory.times[[1000, 5000, 9000]]
    reports = speed_profile(trajectory, times)
    assert len(reports) == 3
    for report in reports:
        assert report.kind is BoundKind.SPEED_RATE
        assert report.satisfied
        assert report.terms["rate"] >= 0.0


def test_speed_window_must_span_two_steps(worked_trap):
    _, trajectory, _ = worked_trap
    with pytest.raises(ConfigurationError, match="two grid steps"):
        speed_rate_check(trajectory, 0.5, delta=trajectory.step)
    with pytest.raises(ConfigurationError, match="leaves the trajectory"):
        speed_rate_check(trajectory, trajectory.horizon, delta=10 * trajectory.step)


def test_speed_rate_is_not_a_trajectory_bound():
    _, trajectory, bd = run(nondim_rlc())
    with pytest.raises(ConfigurationError):
        evaluate_bound(BoundKind.SPEED_RATE, trajectory, bd)


def test_vanishing_position_weight_recovers_velocity_form():
    _, trajectory, bd = run(nondim_trap(center_shift=0.5), FINE)
    limit, velocity = evaluate_bounds(
        [BoundKind.SIGMA_UPPER_A, BoundKind.SIGMA_UPPER_B], trajectory, bd, ForceRegime.F_IRR_ZERO, (1e-10,)
    )
    scale = abs(velocity.terms["reversible_force_action"]) + abs(velocity.terms["B"])
    assert limit.lhs == pytest.approx(velocity.lhs, rel=1e-4, abs=1e-4 * scale)
    assert limit.satisfied and velocity.satisfied


def test_similarity_and_control_effort_agree_after_fisher_substitution():
    _, trajectory, bd = run(nondim_trap(center_shift=0.5))
    (report,) = evaluate_bounds([BoundKind.SIMIL_FIRR0], trajectory, bd, ForceRegime.F_IRR_ZERO)
    assert bd.Sigma_pu == 0.0
    assert report.terms["control_effort_rhs"] == pytest.approx(report.rhs, rel=1e-6, abs=1e-6 * bd.fisher_integral)
