"""
Tests for linear Langevin systems and Gaussian moment propagation.
"""

import numpy as np
import pytest

from core.errors import ConfigurationError, NumericalError
from core.linear_langevin import (
    AffineDriftProtocol,
    DiffusionMatrix,
    GaussianState,
    LinearLangevinSystem,
    MobilityMatrix,
    ParitySignature,
    equilibrium_state,
    marginal,
    propagate_moments,
    reference_moments,
    second_moment_derivative,
    tabulated_scalar,
    underdamped_system,
)
from scenarios.trap import TrapScenario, trap_protocol_paper
from tests.fixtures.systems import FAST, constant_system, nondim_trap, standard_state


def test_parity_signature_rejects_bad_entries():
    with pytest.raises(ConfigurationError):
        ParitySignature((1, 0))
    with pytest.raises(ConfigurationError):
        ParitySignature(())
    assert ParitySignature.underdamped().signs == (1, -1)
    assert ParitySignature.rlc().signs == (-1, 1)


def test_diffusion_must_be_parity_invariant():
    """Off-diagonal coupling between an even and an odd coordinate breaks P D P = D."""
    with pytest.raises(ConfigurationError, match="parity invariant"):
        constant_system(-np.eye(2), [[1.0, 0.5], [0.5, 1.0]])


def test_mobility_must_match_diffusion():
    with pytest.raises(ConfigurationError, match="mobility entry 1"):
        LinearLangevinSystem(
            drift=AffineDriftProtocol.constant(-np.eye(2), np.zeros(2), 1.0),
            diffusion=DiffusionMatrix(np.diag([0.0, 2.0])),
            parity=ParitySignature.underdamped(),
            mobility=MobilityMatrix((1.0, 1.0)),
            k_B=1.0,
            T=1.0,
        )


def test_diffusion_must_be_psd():
    with pytest.raises(ConfigurationError):
        DiffusionMatrix(np.diag([1.0, -1.0]))


def test_gaussian_state_requires_positive_definite_covariance():
    with pytest.raises(NumericalError):
        GaussianState(np.zeros(2), np.diag([1.0, 0.0]))
    with pytest.raises(ConfigurationError):
        GaussianState(np.zeros(2), np.eye(3))


def test_underdamped_equilibrium_is_gibbs():
    """x variance k_B T / q, v variance k_B T / m."""
    system = underdamped_system(m=2.0, gamma=1.0, k_B=1.0, T=1.5, stiffness=lambda t: 3.0, horizon=1.0)
    state = equilibrium_state(system)
    np.testing.assert_allclose(state.cov, np.diag([1.5 / 3.0, 1.5 / 2.0]), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(state.mean, 0.0, atol=1e-15)


def test_equilibrium_requires_hurwitz_drift():
    free = underdamped_system(m=1.0, gamma=1.0, k_B=1.0, T=1.0, stiffness=lambda t: 0.0, horizon=1.0)
    with pytest.raises(NumericalError, match="not Hurwitz"):
        equilibrium_state(free)


def test_equilibrium_is_stationary_under_propagation():
    scenario = nondim_trap(protocol="static", stiffness=2.0, start_at_equilibrium=True)
    system = scenario.system()
    trajectory = propagate_moments(system, scenario.initial_state(system), 500)
    drift = np.abs(trajectory.covs - trajectory.covs[0]).max() / np.abs(trajectory.covs[0]).max()
    assert drift <= 1e-10
    np.testing.assert_allclose(trajectory.means, 0.0, atol=1e-15)


def test_rk4_matches_adaptive_reference():
    scenario = nondim_trap(center_shift=0.5)
    system = scenario.system()
    initial = scenario.initial_state(system)
    trajectory = propagate_moments(system, initial, FAST.steps, FAST)
    ref_means, ref_covs = reference_moments(system, initial)
    np.testing.assert_allclose(trajectory.final.cov, ref_covs[-1], rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(trajectory.final.mean, ref_means[-1], rtol=1e-8, atol=1e-12)


def test_halving_the_step_gives_fourth_order_error_reduction():
    scenario = nondim_trap(center_shift=0.5)
    system = scenario.system()
    initial = scenario.initial_state(system)
    ref_means, ref_covs = reference_moments(system, initial)
    errors = []
    for steps in (20, 40, 80):
        final = propagate_moments(system, initial, steps, FAST).final
        errors.append(max(np.abs(final.cov - ref_covs[-1]).max(), np.abs(final.mean - ref_means[-1]).max()))
    assert errors[0] / errors[1] >= 8.0
    assert errors[1] / errors[2] == pytest.approx(16.0, rel=0.25)


def test_trajectory_grid_shape():
    system = nondim_trap().system()
    trajectory = propagate_moments(system, standard_state(), 100)
    assert trajectory.steps == 100
    assert trajectory.times.shape == (101,)
    assert trajectory.covs.shape == (101, 2, 2)
    assert trajectory.horizon == pytest.approx(1.0)
    np.testing.assert_allclose(trajectory.covs, np.swapaxes(trajectory.covs, 1, 2))
    assert trajectory.index_of(0.5) == 50
    with pytest.raises(ConfigurationError):
        trajectory.index_of(0.505)


def test_propagate_rejects_too_few_steps():
    system = nondim_trap().system()
    with pytest.raises(ConfigurationError):
        propagate_moments(system, standard_state(), 1)
    with pytest.raises(ConfigurationError):
        propagate_moments(system, standard_state(3), 10)


def test_second_moment_derivative_vanishes_at_equilibrium():
    system = constant_system([[0.0, 1.0], [-2.0, -1.0]], np.diag([0.0, 1.0]))
    state = equilibrium_state(system)
    np.testing.assert_allclose(second_moment_derivative(system, state, 0.0), 0.0, atol=1e-12)


def test_marginal_extracts_coordinate():
    state = GaussianState(np.array([1.0, -2.0]), np.array([[2.0, 0.3], [0.3, 0.5]]))
    m = marginal(state, 1)
    assert m.mean == -2.0
    assert m.variance == 0.5
    with pytest.raises(IndexError):
        marginal(state, 2)


def test_tabulated_protocol_must_cover_horizon():
    with pytest.raises(ConfigurationError, match="covers"):
        tabulated_scalar([0.0, 0.5], [1.0, 2.0], 1.0)
    with pytest.raises(ConfigurationError, match="increasing"):
        tabulated_scalar([0.0, 0.0, 1.0], [1.0, 2.0, 3.0], 1.0)
    fn = tabulated_scalar([0.0, 1.0], [1.0, 3.0], 1.0)
    assert fn(0.5) == pytest.approx(2.0)


def test_steering_protocol_domain():
    assert trap_protocol_paper(0.0, gamma=2.0, k_B=1.0, T=1.0) == pytest.approx(1.0 + 1.0)
    with pytest.raises(ConfigurationError):
        trap_protocol_paper(2.0, gamma=1.0, k_B=1.0, T=1.0)
    with pytest.raises(ConfigurationError):
        trap_protocol_paper(-0.1, gamma=1.0, k_B=1.0, T=1.0)
    with pytest.raises(ConfigurationError, match="pole"):
        TrapScenario(tau=2.0)


def test_steering_protocol_quarters_position_variance():
    """In the strongly damped regime the printed protocol takes the x variance from 1 to about 0.25."""
    scenario = TrapScenario()
    system = scenario.system()
    trajectory = propagate_moments(system, scenario.initial_state(system), 10_000)
    assert trajectory.final.cov[0, 0] == pytest.approx(0.25, abs=0.01)
