"""
Tests for the Euler-Maruyama Monte Carlo oracle.
"""

import numpy as np
import pytest

from core.current_decomposition import accumulate_actions
from core.errors import ConfigurationError
from core.linear_langevin import GaussianState, propagate_moments
from scenarios.trap import TrapScenario
from tests.fixtures.systems import FAST, constant_system, nondim_rlc, nondim_trap
from tools import mc_oracle
from tools.mc_oracle import (
    McConfig,
    default_observables,
    estimate_quadratic_integrals,
    noise_factor,
    simulate_paths,
    within_stderr,
)

BALLISTIC = [[0.0, 1.0], [0.0, 0.0]]
SPEED = {"kinetic": lambda t: (np.array([0.0, 1.0]), 0.0)}


@pytest.mark.parametrize("changes", [
    {"paths": 999},
    {"dt": 0.0},
    {"dt": 0.02},
    {"record_every": 0},
    {"seed": -1},
], ids=["few-paths", "zero-dt", "coarse-dt", "record-every", "negative-seed"])
def test_config_validation(changes):
    with pytest.raises(ConfigurationError):
        McConfig(**changes).validate(1.0)


def test_noise_factor_keeps_noiseless_coordinates_exact():
    D = np.diag([0.0, 1.5])
    R = noise_factor(D, 0.1)
    np.testing.assert_allclose(R @ R.T, 2.0 * 0.1 * D, atol=1e-15)
    np.testing.assert_allclose(R[0], 0.0, atol=1e-15)


def test_default_observables():
    assert set(default_observables(nondim_trap().system())) == {"kinetic", "force"}
    assert set(default_observables(nondim_rlc().system())) == {"kinetic", "force"}
    assert default_observables(constant_system(-np.eye(2), np.eye(2))) == {}


def test_within_stderr():
    assert within_stderr(1.0, 1.3, 0.1) == (True, pytest.approx(3.0))
    assert not within_stderr(1.0, 1.5, 0.1)[0]
    assert within_stderr(2.5, 2.5 + 1e-15, 0.0)[0]
    assert not within_stderr(2.5, 2.5001, 0.0)[0]
    assert within_stderr(0.0, 0.0, 0.0) == (True, 0.0)


def test_same_seed_same_paths():
    scenario = nondim_trap()
    system = scenario.system()
    config = McConfig(paths=1000, dt=1e-2, seed=11, record_every=10)
    a = simulate_paths(system, scenario.initial_state(system), config)
    b = simulate_paths(system, scenario.initial_state(system), config)
    c = simulate_paths(system, scenario.initial_state(system), McConfig(paths=1000, dt=1e-2, seed=12, record_every=10))
    np.testing.assert_array_equal(a.final_samples, b.final_samples)
    assert not np.array_equal(a.final_samples, c.final_samples)
    assert a.paths == 1000
    assert a.times[0] == 0.0
    assert a.times[-1] == pytest.approx(1.0)
    assert len(a.times) == 11


def test_path_noise_does_not_depend_on_path_count_or_blocking(monkeypatch):
    scenario = nondim_trap()
    system = scenario.system()
    initial = scenario.initial_state(system)
    small = simulate_paths(system, initial, McConfig(paths=1000, dt=1e-2, seed=4, record_every=100))
    large = simulate_paths(system, initial, McConfig(paths=2000, dt=1e-2, seed=4, record_every=100))
    np.testing.assert_allclose(small.initial_samples, large.initial_samples[:1000], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(small.final_samples, large.final_samples[:1000], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(small.integrals["force"], large.integrals["force"][:1000], rtol=1e-12)

    monkeypatch.setattr(mc_oracle, "BLOCK_DRAWS", 1000)
    blocked = simulate_paths(system, initial, McConfig(paths=1000, dt=1e-2, seed=4, record_every=100))
    np.testing.assert_allclose(small.final_samples, blocked.final_samples, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(small.covs, blocked.covs, rtol=1e-12, atol=1e-14)


def test_noiseless_point_start_has_zero_error():
    system = constant_system(BALLISTIC, np.zeros((2, 2)))
    paths = simulate_paths(system, np.array([0.5, 2.0]), McConfig(paths=1000, dt=1e-2, record_every=50, observables=SPEED))
    assert default_observables(system) == {}

    np.testing.assert_allclose(paths.means[:, 0], 0.5 + 2.0 * paths.times, rtol=1e-13)
    np.testing.assert_allclose(paths.means[:, 1], 2.0, rtol=0.0)
    assert np.all(paths.covs == 0.0)
    assert np.all(paths.mean_stderr == 0.0)
    assert np.all(paths.cov_stderr == 0.0)

    kinetic = estimate_quadratic_integrals(paths)["kinetic"]
    assert kinetic.stderr == 0.0
    assert within_stderr(kinetic.value, 4.0, kinetic.stderr)[0]


def test_noiseless_gaussian_start_is_exact_per_path():
    system = constant_system(BALLISTIC, np.zeros((2, 2)))
    initial = GaussianState([0.0, 1.0], [[1.0, 0.3], [0.3, 0.5]])
    paths = simulate_paths(system, initial, McConfig(paths=1000, dt=1e-2, seed=2, record_every=100, observables=SPEED))

    flight = np.array([[1.0, 1.0], [0.0, 1.0]])
    np.testing.assert_allclose(paths.final_samples, paths.initial_samples @ flight.T, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(paths.integrals["kinetic"], paths.initial_samples[:, 1] ** 2, rtol=1e-12, atol=1e-14)
    assert np.all(paths.cov_stderr[-1] > 0.0)


@pytest.mark.slow
def test_moments_and_kinetic_integral_agree_with_propagation():
    scenario = nondim_trap(center_shift=0.5)
    system = scenario.system()
    initial = scenario.initial_state(system)
    paths = simulate_paths(system, initial, McConfig(paths=10_000, dt=1e-3, seed=5, record_every=100))
    trajectory = propagate_moments(system, initial, 1000, FAST)

    final_se = paths.cov_stderr[-1]
    assert np.all(np.abs(paths.covs[-1] - trajectory.final.cov) <= 4.0 * final_se + 2e-3)
    assert np.all(np.abs(paths.means[-1] - trajectory.final.mean) <= 4.0 * paths.mean_stderr[-1] + 2e-3)

    second = trajectory.covs[:, 1, 1] + trajectory.means[:, 1] ** 2
    expected = float(np.sum(0.5 * np.diff(trajectory.times) * (second[1:] + second[:-1])))
    kinetic = estimate_quadratic_integrals(paths)["kinetic"]
    assert kinetic.stderr > 0.0
    assert abs(kinetic.value - expected) <= 4.0 * kinetic.stderr + 2e-3


@pytest.mark.slow
@pytest.mark.parametrize("scenario, dt", [
    (TrapScenario(), 1e-4),
    (nondim_rlc(), 1e-3),
], ids=["worked-trap", "rlc-ramp"])
def test_quadratic_integrals_agree_with_breakdown(scenario, dt):
    system = scenario.system()
    initial = scenario.initial_state(system)
    trajectory = propagate_moments(system, initial, 10_000, FAST)
    breakdown = accumulate_actions(trajectory, FAST)
    paths = simulate_paths(system, initial, McConfig(paths=10_000, dt=dt, seed=9, record_every=10**6))
    estimates = estimate_quadratic_integrals(paths)

    for name, exact in (("kinetic", breakdown.kinetic_integral), ("force", breakdown.control_effort)):
        assert estimates[name].stderr > 0.0
        ok, z = within_stderr(estimates[name].value, exact, estimates[name].stderr)
        assert ok, (name, z)
    assert np.all(np.abs(paths.covs[-1] - trajectory.final.cov) <= 4.0 * paths.cov_stderr[-1])
