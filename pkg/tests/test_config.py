"""
Tests for TOML run configuration and environment runtime settings.
"""

from pathlib import Path

import pytest

from config.app_config import RuntimeSettings
from config.run_config import PRESETS_DIR, RunConfig, load_run_config, validate_run_config
from core.errors import ConfigurationError
from data.models import BoundKind, ForceRegime

CONFIGS = Path(__file__).parent / "fixtures" / "configs"


def test_defaults_reproduce_worked_example():
    config = load_run_config(None)
    assert config.run.scenario == "trap"
    assert config.solver.steps == 10_000
    scenario = config.trap.build()
    assert scenario.gamma == pytest.approx(1e-8)
    assert scenario.protocol == "steering"
    assert config.sweep.values()[0] == pytest.approx(1e-2)
    assert len(config.sweep.values()) == 40


def test_missing_file():
    with pytest.raises(ConfigurationError, match="not found"):
        load_run_config(CONFIGS / "absent.toml")


def test_broken_toml():
    with pytest.raises(ConfigurationError, match="not valid TOML"):
        load_run_config(CONFIGS / "broken.toml")


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigurationError, match="invalid run configuration"):
        validate_run_config({"trap": {"stifness": 2.0}})
    with pytest.raises(ConfigurationError):
        validate_run_config({"protocol": {"shape": "ramp"}})


@pytest.mark.parametrize("data", [
    {"trap": {"tau": 2.0}},
    {"trap": {"m": 0.0}},
    {"run": {"threads": 0}},
    {"solver": {"steps": 1}},
    {"bounds": {"alpha": [1.0, 0.0]}},
    {"bounds": {"kinds": ["NOT_A_BOUND"]}},
    {"sweep": {"grid": [1.0, -1.0]}},
    {"check": {"suites": ["moments", "astrology"]}},
    {"check": {"mc_paths": 10}},
    {"run": {"scenario": "custom"}},
], ids=["steering-pole", "mass", "threads", "steps", "alpha", "kind", "grid", "suite", "mc-paths", "custom-missing"])
def test_invalid_values(data):
    with pytest.raises(ConfigurationError):
        validate_run_config(data)


@pytest.mark.parametrize("name", ["trap.toml", "rlc.toml", "fig1.toml", "check.toml"])
def test_presets_load(name):
    assert isinstance(load_run_config(PRESETS_DIR / name), RunConfig)


def test_overrides_take_precedence():
    config = load_run_config(CONFIGS / "trap_small.toml")
    changed = config.with_overrides(out="elsewhere", threads=3, si=True, seed=9)
    assert changed.output.dir == "elsewhere"
    assert changed.run.threads == 3
    assert changed.output.si is True
    assert changed.run.seed == 9
    same = config.with_overrides()
    assert same.model_dump() == config.model_dump()


def test_bounds_section_parses_kinds_and_regime():
    config = validate_run_config({"bounds": {"kinds": ["MASTER", "KHOD_X"], "regime": "f_rev_zero"}})
    assert config.bounds.kinds == [BoundKind.MASTER, BoundKind.KHOD_X]
    assert config.bounds.regime is ForceRegime.F_REV_ZERO


def test_build_trap_system():
    system, initial, regime = load_run_config(CONFIGS / "trap_small.toml").build_system()
    assert system.family == "underdamped"
    assert initial.mean.shape == (2,)
    assert regime is ForceRegime.F_IRR_ZERO


def test_build_rlc_system():
    system, _, regime = validate_run_config({"run": {"scenario": "rlc"}}).build_system()
    assert system.family == "rlc"
    assert regime is ForceRegime.F_IRR_ZERO


def test_build_custom_system():
    config = load_run_config(CONFIGS / "custom_ou.toml")
    system, initial, regime = config.build_system()
    assert system.family == "custom"
    assert system.n == 2
    assert regime is ForceRegime.GENERAL
    assert initial.mean[0] == 0.5


def test_resolved_is_plain_data():
    resolved = load_run_config(CONFIGS / "trap_small.toml").resolved()
    assert resolved["run"]["name"] == "trap-small"
    assert "custom" not in resolved
    assert resolved["trap"]["protocol"] == "ramp"


def test_check_settings_carry_seed():
    settings = validate_run_config({"check": {"suites": ["moments"]}}).check.to_settings(7)
    assert settings.seed == 7
    assert settings.suites == ("moments",)


@pytest.fixture
def clean_env(monkeypatch):
    for name in ("LOG_LEVEL", "LOG_JSON", "THREADS", "OUT_DIR", "SEED"):
        monkeypatch.delenv(f"SPEEDLIMITS_{name}", raising=False)
    return monkeypatch


def test_runtime_settings_defaults(clean_env):
    settings = RuntimeSettings.from_env()
    assert settings.log_level == "WARNING"
    assert settings.log_json is False
    assert settings.threads is None
    assert settings.out_dir is None
    assert settings.seed is None


def test_runtime_settings_from_env(clean_env):
    clean_env.setenv("SPEEDLIMITS_LOG_LEVEL", "debug")
    clean_env.setenv("SPEEDLIMITS_LOG_JSON", "true")
    clean_env.setenv("SPEEDLIMITS_THREADS", "4")
    clean_env.setenv("SPEEDLIMITS_OUT_DIR", "/tmp/speed")
    clean_env.setenv("SPEEDLIMITS_SEED", "3")
    settings = RuntimeSettings.from_env()
    assert settings.log_level == "DEBUG"
    assert settings.log_json is True
    assert settings.threads == 4
    assert settings.out_dir == Path("/tmp/speed")
    assert settings.seed == 3


@pytest.mark.parametrize("name,value", [
    ("SPEEDLIMITS_LOG_LEVEL", "LOUD"),
    ("SPEEDLIMITS_THREADS", "many"),
    ("SPEEDLIMITS_THREADS", "0"),
    ("SPEEDLIMITS_SEED", "-1"),
])
def test_runtime_settings_rejects_bad_values(clean_env, name, value):
    clean_env.setenv(name, value)
    with pytest.raises(ConfigurationError):
        RuntimeSettings.from_env()
