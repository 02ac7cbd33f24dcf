import json

import numpy as np
import pytest

from modules.experiments.config import build_experiment_config
from modules.experiments.simulate import simulate_experiment
from modules.inference.model import Scenario
from utils.utils.exceptions import ConfigurationError

from conftest import tiny_experiment


def _config(tmp_path, **sections):
    return build_experiment_config(tiny_experiment(tmp_path, **sections))


def test_shared_simulation_observes_both_responses(tmp_path):
    data, truth = simulate_experiment(_config(tmp_path))
    assert data.is_shared()
    assert data.n_sites == truth.counts["n"]
    assert set(truth.fields) == {"eta1", "w1", "w2"}
    assert truth.fields["eta1"].shape == (25,)


def test_simulation_is_seeded(tmp_path):
    config = _config(tmp_path)
    a, _ = simulate_experiment(config)
    b, _ = simulate_experiment(config)
    c, _ = simulate_experiment(config, seed=8)
    np.testing.assert_array_equal(a.sites, b.sites)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.n_sites != c.n_sites or not np.array_equal(a.sites, c.sites)


def test_disjoint_simulation_draws_two_patterns(tmp_path):
    config = _config(
        tmp_path,
        experiment={"scenario": "disjoint", "models": ["M1star", "M2star"]},
        data={"simulation": {"preset": "disjoint_low", "alpha": [3.5, 0.0]}},
    )
    data, truth = simulate_experiment(config)
    assert not np.any(data.mask.all(axis=1))
    assert data.mask[:, 0].sum() == truth.counts["n1"]
    assert data.mask[:, 1].sum() == truth.counts["n2"]
    assert "eta2" in truth.fields
    assert truth.params["eta2"]["sigma2"] == pytest.approx(1.0 / 3.0)


@pytest.mark.parametrize("preset, local_cov", [("dependence_data1", -0.1), ("dependence_data2", -0.7)])
def test_dependence_designs_have_known_local_covariance(tmp_path, preset, local_cov):
    config = _config(tmp_path, data={"simulation": {"preset": preset, "alpha": [3.5]}})
    _, truth = simulate_experiment(config)
    assert truth.params["coreg"]["a21"] == -0.4
    assert truth.local_dependence()["cov"] == pytest.approx(local_cov)
    curves = truth.dependence_curves(np.array([0.0, 0.5]))
    assert curves["cov21"][0] == pytest.approx(local_cov)


def test_truth_file_is_json(tmp_path):
    _, truth = simulate_experiment(_config(tmp_path))
    truth.save(tmp_path / "truth.json")
    loaded = json.loads((tmp_path / "truth.json").read_text(encoding="utf-8"))
    assert loaded["scenario"] == Scenario.SHARED.value
    assert loaded["params"]["gamma"] == [1.0, 0.3]
    assert loaded["seed"] == 7


def test_csv_source_cannot_be_simulated(tmp_path):
    raw = tiny_experiment(tmp_path)
    raw["data"] = {"source": "csv", "csv": {"path": str(tmp_path / "x.csv")}}
    with pytest.raises(ConfigurationError):
        simulate_experiment(build_experiment_config(raw))
