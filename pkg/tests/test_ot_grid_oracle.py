"""
Tests for the discrete optimal-transport check on the closed-form distances.
"""

import numpy as np
import pytest

from core.errors import ConfigurationError, OracleError
from core.linear_langevin import GaussianState, MobilityMatrix
from tools.ot_grid_oracle import MAX_SUPPORT, GridSpec, discretize_gaussian, verify_closed_form


@pytest.mark.parametrize("kwargs", [
    {"dimension": 3},
    {"points": 10},
    {"radius": 0.0},
])
def test_grid_spec_validation(kwargs):
    with pytest.raises(ConfigurationError):
        GridSpec(**kwargs)


def test_one_dimensional_grid_has_equal_weights():
    grid = discretize_gaussian(GaussianState([0.0], [[1.0]]), GridSpec(points=200))
    assert grid.truncated_mass == 0.0
    np.testing.assert_allclose(grid.density.weights, 1.0 / 200)
    assert np.all(np.diff(grid.density.points.ravel()) > 0)


def test_variance_change_in_one_dimension():
    result = verify_closed_form(GaussianState([0.0], [[1.0]]), GaussianState([0.0], [[0.5]]))
    assert result.closed == pytest.approx(1.0 - np.sqrt(0.5))
    assert result.passed


def test_refinement_shrinks_the_gap_on_a_fixed_pair():
    pair = (GaussianState([0.0], [[1.0]]), GaussianState([0.0], [[0.5]]))
    gaps = [verify_closed_form(*pair, spec=GridSpec(points=p)).relative_gap for p in (50, 100, 200)]
    assert gaps[0] > gaps[1] > gaps[2] > 0.0
    assert gaps[2] < 0.02


def test_identical_states_have_no_gap():
    g = GaussianState([0.3], [[2.0]])
    result = verify_closed_form(g, g)
    assert result.closed == 0.0
    assert result.relative_gap == 0.0
    assert result.passed


def test_weighted_marginal_of_a_two_dimensional_state():
    g0 = GaussianState(np.zeros(2), np.eye(2))
    g1 = GaussianState(np.array([0.5, -1.0]), np.array([[1.0, 0.2], [0.2, 2.0]]))
    result = verify_closed_form(g0, g1, MobilityMatrix((1.0, 4.0)), GridSpec(points=200, coord=1))
    assert result.passed


def test_two_dimensional_grid_over_the_cap_is_refused():
    assert 50**2 > MAX_SUPPORT
    with pytest.raises(OracleError, match="exceeds the cap"):
        discretize_gaussian(GaussianState(np.zeros(2), np.eye(2)), GridSpec(dimension=2, points=50))


def test_two_dimensional_pair():
    g0 = GaussianState(np.zeros(2), np.eye(2))
    g1 = GaussianState(np.array([1.0, 0.5]), np.diag([2.0, 0.5]))
    result = verify_closed_form(g0, g1, spec=GridSpec(dimension=2, points=40))
    assert result.truncated_mass <= 1e-6
    assert result.passed
    assert result.discrete <= result.closed * (1.0 + 1e-9)
