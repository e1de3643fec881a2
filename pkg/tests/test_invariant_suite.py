"""
Tests for the `check` invariant suites.
"""

import pytest

from tools.invariant_suite import SUITES, CheckSettings, run_suites


def test_suite_registry():
    assert set(SUITES) == {"moments", "bookkeeping", "wasserstein", "bounds", "speed", "mc"}
    assert CheckSettings().solver.steps == 10_000


def test_wasserstein_suite_passes():
    settings = CheckSettings(seed=3, metric_triples=20, random_pairs=1, suites=("wasserstein",))
    outcomes = run_suites(settings)
    assert [o.name for o in outcomes] == [
        "symmetry", "triangle_inequality", "closed_form_vs_grid_1d", "closed_form_vs_grid_2d",
        "grid_gap_shrinks_under_refinement",
    ]
    assert all(o.passed for o in outcomes)


def test_bookkeeping_suite_passes():
    outcomes = run_suites(CheckSettings(steps=2000, suites=("bookkeeping",)))
    assert len(outcomes) == 9
    assert outcomes[-1].name == "entropy_balance_converges"
    assert all(o.passed for o in outcomes), [o for o in outcomes if not o.passed]


def test_moments_suite_passes():
    outcomes = run_suites(CheckSettings(steps=2000, suites=("moments",)))
    assert [o.name for o in outcomes] == [
        "gibbs_state_is_stationary", "lyapunov_residual", "rk4_matches_reference", "rk4_fourth_order_convergence",
    ]
    assert all(o.passed for o in outcomes), [o for o in outcomes if not o.passed]


@pytest.mark.slow
def test_mc_suite_passes():
    outcomes = run_suites(CheckSettings(steps=4000, mc_paths=2000, seed=1, suites=("mc",)))
    labels = {o.name.split(":")[0] for o in outcomes}
    assert labels == {"trap", "worked_trap", "rlc", "ballistic"}
    assert all(o.passed for o in outcomes), [o for o in outcomes if not o.passed]
    exact = [o for o in outcomes if o.name.startswith("ballistic:")]
    assert len(exact) == 3 and all(o.worst <= 1e-12 for o in exact)
