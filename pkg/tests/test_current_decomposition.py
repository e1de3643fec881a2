"""
Tests for the current decomposition and the action functionals.
"""

import numpy as np
import pytest

from core.current_decomposition import (
    accumulate_actions,
    action_rates,
    cross_term_identity,
    fisher_substitution,
    lambda_decomposition,
    rate_profile,
    split_drift,
    velocity_fields,
)
from core.errors import ConfigurationError
from core.linear_langevin import GaussianState, ParitySignature, equilibrium_state, propagate_moments
from tests.fixtures.systems import FAST, constant_system, nondim_rlc, nondim_trap, run


def test_split_drift_parts():
    A = np.array([[0.3, 1.0], [-2.0, -0.7]])
    c = np.array([0.2, -0.4])
    parts = split_drift(A, c, ParitySignature.underdamped())
    P = np.diag([1.0, -1.0])
    np.testing.assert_allclose(parts.A_rev + parts.A_irr, A)
    np.testing.assert_allclose(parts.c_rev + parts.c_irr, c)
    np.testing.assert_allclose(P @ parts.A_rev @ P, -parts.A_rev)
    np.testing.assert_allclose(P @ parts.A_irr @ P, parts.A_irr)
    np.testing.assert_allclose(parts.A_rev, [[0.0, 1.0], [-2.0, 0.0]])


def test_irreversible_drift_on_noiseless_coordinate_is_rejected():
    system = constant_system(-np.eye(2), np.diag([0.0, 1.0]))
    state = GaussianState(np.zeros(2), np.eye(2))
    with pytest.raises(ConfigurationError, match="noiseless"):
        velocity_fields(system, state, 0.0)


def test_equilibrium_has_no_irreversible_current():
    system = nondim_trap(protocol="static", stiffness=2.0).system()
    state = equilibrium_state(system)
    rates = action_rates(system, state, 0.0)
    assert abs(rates.sigma_rate) <= 1e-12
    assert rates.y_rate > 0.0


def test_rates_are_nonnegative_along_a_protocol():
    _, trajectory, _ = run(nondim_trap(center_shift=0.5))
    rates = rate_profile(trajectory)
    assert np.all(rates.sigma >= 0.0)
    assert np.all(rates.y >= 0.0)


def test_rate_profile_matches_pointwise_rates():
    system, trajectory, _ = run(nondim_trap())
    profile = rate_profile(trajectory)
    k = 700
    pointwise = action_rates(system, trajectory.state(k), float(trajectory.times[k]))
    assert profile.sigma[k] == pytest.approx(pointwise.sigma_rate, rel=1e-10)
    assert profile.y[k] == pytest.approx(pointwise.y_rate, rel=1e-10)
    assert profile.phi[k] == pytest.approx(pointwise.phi_rate, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("scenario", [
    nondim_trap(center_shift=0.5),
    nondim_trap(extra_friction=0.5),
    nondim_rlc(),
], ids=["trap", "refrigerator", "rlc"])
def test_entropy_balance(scenario):
    _, _, bd = run(scenario)
    scale = max(abs(bd.Sigma), abs(bd.Sigma_sys), abs(bd.Sigma_res))
    assert abs(bd.bookkeeping_gap) <= 1e-5 * scale


def test_entropy_balance_converges_under_refinement():
    gaps = []
    for steps in (20, 40, 80):
        _, _, bd = run(nondim_trap(center_shift=0.5), FAST.with_overrides(steps=steps))
        gaps.append(abs(bd.bookkeeping_gap))
    assert gaps[0] / gaps[1] >= 3.5
    assert gaps[1] / gaps[2] >= 3.5


def test_pumped_entropy_is_exact_zero_for_even_force():
    _, _, bd = run(nondim_trap(center_shift=0.5))
    assert bd.Sigma_pu == 0.0
    assert any("Sigma_pu" in note for note in bd.notes)


def test_velocity_dependent_force_pumps_entropy():
    _, _, bd = run(nondim_trap(extra_friction=0.5))
    assert bd.Sigma_pu != 0.0
    assert not bd.notes


def test_cross_term_identity_for_even_force():
    _, _, bd = run(nondim_trap(center_shift=0.5))
    phi, boundary = cross_term_identity(bd)
    assert phi == pytest.approx(boundary, rel=1e-6, abs=1e-6 * max(abs(bd.Sigma), abs(bd.Sigma_sys)))


def test_cross_term_identity_for_rlc():
    _, _, bd = run(nondim_rlc())
    phi, boundary = cross_term_identity(bd)
    assert phi == pytest.approx(boundary, rel=1e-6, abs=1e-6 * max(abs(bd.Sigma), abs(bd.Sigma_sys)))


@pytest.mark.parametrize("changes", [{"center_shift": 0.5}, {"extra_friction": 0.5}])
def test_fisher_substitution(changes):
    _, trajectory, bd = run(nondim_trap(**changes))
    fisher, rebuilt = fisher_substitution(trajectory, bd)
    assert fisher > 0.0
    assert fisher == pytest.approx(rebuilt, rel=1e-6)


@pytest.mark.parametrize("changes", [{"center_shift": 0.5}, {"extra_friction": 0.5}])
def test_lambda_terms_sum_to_phi(changes):
    _, trajectory, bd = run(nondim_trap(**changes))
    lam = lambda_decomposition(trajectory, bd)
    scale = max(abs(lam.lambda1), abs(lam.lambda2), abs(lam.lambda3), abs(lam.phi))
    assert lam.total == pytest.approx(lam.phi, abs=1e-6 * scale)


def test_lambda_decomposition_is_underdamped_only():
    _, trajectory, bd = run(nondim_rlc())
    with pytest.raises(ConfigurationError):
        lambda_decomposition(trajectory, bd)


def test_system_entropy_matches_log_determinant():
    _, trajectory, bd = run(nondim_trap())
    expected = 0.5 * np.log(np.linalg.det(trajectory.final.cov) / np.linalg.det(trajectory.initial.cov))
    assert bd.Sigma_sys == pytest.approx(expected, rel=1e-10)


def test_breakdown_dict_units():
    scenario = nondim_trap(k_B=2.0)
    system = scenario.system()
    trajectory = propagate_moments(system, scenario.initial_state(system), FAST.steps, FAST)
    bd = accumulate_actions(trajectory, FAST)
    si = bd.as_dict(si=True)
    kb = bd.as_dict(si=False)
    assert kb["Sigma"] == pytest.approx(si["Sigma"] / 2.0)
    assert kb["delta_E"] == si["delta_E"]
    assert bd.entropy_production_rate == pytest.approx(bd.Sigma / bd.tau)
