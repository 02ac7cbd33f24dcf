from pathlib import Path

import pytest

from modules.evaluation.holdout import HoldoutStrategy
from modules.experiments.config import (
    SIMULATION_PRESETS,
    SimulationConfig,
    build_experiment_config,
    load_experiment_config,
)
from modules.inference.model import ModelFamily, Scenario
from utils.utils.exceptions import ConfigurationError

from conftest import tiny_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
@pytest.mark.parametrize("profile", [None, "smoke", "paper"])
def test_shipped_configs_validate(path, profile):
    config = load_experiment_config(str(path), profile)
    assert config.holdouts
    assert all(m.allowed_in(config.experiment.scenario) for m in config.experiment.models)


def test_smoke_profile_shortens_chains():
    config = load_experiment_config(str(CONFIG_DIR / "shared_low_variance.yaml"), "smoke")
    assert config.mcmc.n_burn == 1000 and config.mcmc.n_keep == 2000
    assert config.grid.resolution == 15
    assert [h.strategy for h in config.holdouts[:3]] == list(HoldoutStrategy)


def test_environment_and_flags_override_file(monkeypatch, tmp_path):
    monkeypatch.setenv("PREFSAMPLE_SEED", "11")
    monkeypatch.setenv("PREFSAMPLE_N_KEEP", "30")
    config = load_experiment_config(str(CONFIG_DIR / "shared_low_variance.yaml"))
    assert config.experiment.seed == 11
    assert config.mcmc.n_keep == 30
    config = load_experiment_config(str(CONFIG_DIR / "shared_low_variance.yaml"), seed=5, output_dir=str(tmp_path))
    assert config.experiment.seed == 5
    assert config.output_path == tmp_path


def test_presets_fill_simulation_truth():
    sim = SimulationConfig.model_validate({"preset": "dependence_data2"})
    assert sim.gamma == (1.0, -0.3)
    assert sim.coreg.a21 == -0.4
    assert sim.fix_response_mean
    high = SimulationConfig.model_validate({"preset": "high_variance", "tau2": [0.2, 0.2]})
    assert high.eta.sigma2 == 1.0
    assert high.tau2 == (0.2, 0.2)
    assert set(SIMULATION_PRESETS) >= {"low_variance", "disjoint_low", "dependence_data1"}


@pytest.mark.parametrize("patch", [
    {"data": {"simulation": {"preset": "nope"}}},
    {"data": {"simulation": {"tau2": [0.0, 0.1]}}},
    {"data": {"simulation": {"alpha": [1.0, 2.0, 3.0]}}},
    {"mcmc": {"n_keep": -5}},
    {"experiment": {"models": ["M1star"]}},
    {"experiment": {"scenario": "disjoint", "models": ["M1star"]}, "dependence": {"enabled": True}},
    {"dependence": {"models": ["M2"]}},
    {"holdouts": [{"strategy": "random", "p": 0.7}]},
    {"experiment": {"surprise": 1}},
])
def test_invalid_documents_raise_configuration_error(tmp_path, patch):
    raw = tiny_experiment(tmp_path)
    for key, value in patch.items():
        raw[key] = value if isinstance(value, list) else {**raw.get(key, {}), **value}
    with pytest.raises(ConfigurationError):
        build_experiment_config(raw)


def test_csv_source_needs_csv_section(tmp_path):
    raw = tiny_experiment(tmp_path)
    raw["data"] = {"source": "csv"}
    with pytest.raises(ConfigurationError):
        build_experiment_config(raw)


def test_unknown_profile_is_rejected():
    with pytest.raises(ConfigurationError):
        load_experiment_config(str(CONFIG_DIR / "shared_low_variance.yaml"), "huge")


def test_defaults_describe_the_shared_design(tmp_path):
    config = build_experiment_config({"experiment": {"output_dir": str(tmp_path)}})
    assert config.experiment.scenario is Scenario.SHARED
    assert config.experiment.models == [ModelFamily.M1, ModelFamily.M2, ModelFamily.M3, ModelFamily.M4]
    assert config.dependence.samples == ["all", "biased"]
    assert not config.fix_response_mean


def test_mcmc_section_reaches_sampler_config(tmp_path):
    config = build_experiment_config(tiny_experiment(tmp_path, mcmc={"sample_gamma": False, "thin": 2}))
    mcmc = config.mcmc.to_mcmc_config(seed=3)
    assert not mcmc.sample_gamma
    assert mcmc.thin == 2 and mcmc.seed == 3
    assert build_experiment_config(tiny_experiment(tmp_path)).mcmc.to_mcmc_config(None).sample_gamma
