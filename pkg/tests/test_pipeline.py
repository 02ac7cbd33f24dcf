import numpy as np
import pandas as pd
import pytest

from modules.experiments.config import build_experiment_config
from modules.experiments.pipeline import (
    SEED_CHAIN,
    cell_seed,
    fit_model,
    load_dataset,
    make_cells,
    require_success,
    run_dependence,
    run_pipeline,
    split_dataset,
)
from modules.experiments import results
from modules.inference.model import ModelFamily
from modules.inference.predict import predict_responses
from utils.utils.exceptions import ConfigurationError, PipelineCellError, SamplerError

from conftest import tiny_experiment


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    config = build_experiment_config(tiny_experiment(out))
    return config, run_pipeline(config)


def test_pipeline_writes_every_result_file(tiny_run):
    config, report = tiny_run
    out = config.output_path
    assert report.exit_code == 0 and report.n_cells == 4
    for name in ("config.resolved.yaml", "truth.json", "scores.csv", "params.csv", "intensity.csv", "errors.csv"):
        assert (out / name).exists(), name
    assert len(results.read_csv(out / "errors.csv")) == 0


def test_scores_table(tiny_run):
    config, _ = tiny_run
    scores = results.read_csv(config.output_path / "scores.csv")
    assert list(scores.columns) == results.SCORE_COLUMNS
    assert len(scores) == 4
    assert set(scores["strategy"]) == {"I", "II-a"}
    np.testing.assert_allclose(scores["rmse_sum"], scores["rmse1"] + scores["rmse2"])
    np.testing.assert_allclose(scores["crps_sum"], scores["crps1"] + scores["crps2"])
    assert (scores["n_train1"] + scores["n_test1"]).nunique() == 1


def test_params_table_carries_truth(tiny_run):
    config, _ = tiny_run
    params = results.read_csv(config.output_path / "params.csv")
    gamma = params[(params["model"] == "M2") & (params["parameter"] == "gamma1")]
    assert len(gamma) == 2
    assert np.all(gamma["truth"] == 1.0)
    assert params.loc[params["parameter"] == "tau2_1", "truth"].eq(0.3).all()


def test_intensity_only_for_shared_process_models(tiny_run):
    config, _ = tiny_run
    intensity = results.read_csv(config.output_path / "intensity.csv")
    assert set(intensity["model"]) == {"M2"}
    assert len(intensity) == 2 * 25


def test_pipeline_is_reproducible(tiny_run, tmp_path):
    config, _ = tiny_run
    again = config.model_copy(deep=True)
    again.experiment.output_dir = str(tmp_path)
    run_pipeline(again)
    pd.testing.assert_frame_equal(
        results.read_csv(config.output_path / "scores.csv"),
        results.read_csv(tmp_path / "scores.csv"),
    )


def test_failed_cells_are_recorded(tmp_path, mocker):
    config = build_experiment_config(tiny_experiment(tmp_path))

    def flaky(cfg, model, *args, **kwargs):
        if model is ModelFamily.M2:
            raise SamplerError("Non-finite draws for ['gamma1']")
        return fit_model(cfg, model, *args, **kwargs)

    mocker.patch("modules.experiments.pipeline.fit_model", side_effect=flaky)
    report = run_pipeline(config)
    assert report.exit_code == 1 and report.n_failed == 2
    errors = results.read_csv(tmp_path / "errors.csv")
    assert set(errors["error_type"]) == {"SamplerError"}
    assert set(errors["model"]) == {"M2"}
    assert len(results.read_csv(tmp_path / "scores.csv")) == 2
    with pytest.raises(PipelineCellError):
        require_success(report)


def test_cells_iterate_models_within_holdouts(tmp_path):
    config = build_experiment_config(tiny_experiment(tmp_path))
    cells = make_cells(config)
    assert [(c.holdout_index, c.model.value) for c in cells] == [(0, "M1"), (0, "M2"), (1, "M1"), (1, "M2")]
    assert cells[3].label == "M2/II-a/p=0.2"


def test_cell_seed_ignores_other_configured_models(tmp_path):
    a = build_experiment_config(tiny_experiment(tmp_path))
    b = build_experiment_config(tiny_experiment(tmp_path, experiment={"models": ["M2"]}))
    assert cell_seed(a, SEED_CHAIN, 1, ModelFamily.M2) == cell_seed(b, SEED_CHAIN, 1, ModelFamily.M2)
    assert cell_seed(a, SEED_CHAIN, 0, ModelFamily.M2) != cell_seed(a, SEED_CHAIN, 1, ModelFamily.M2)


def test_split_rejects_unknown_holdout(tmp_path):
    config = build_experiment_config(tiny_experiment(tmp_path))
    data, _ = load_dataset(config)
    with pytest.raises(ConfigurationError):
        split_dataset(config, data, 5)


def test_dependence_analysis_tables(tmp_path):
    raw = tiny_experiment(
        tmp_path,
        experiment={"models": ["M3"]},
        data={"simulation": {"preset": "dependence_data1", "alpha": [3.5]}},
        dependence={"enabled": True, "models": ["M3"], "n_distances": 5},
    )
    config = build_experiment_config(raw)
    data, truth = load_dataset(config)
    result = run_dependence(config, data, truth)

    assert set(result.per_draw["sample"]) == {"all", "biased"}
    assert len(result.per_draw) == 2 * 20 * 5
    local = result.local
    assert len(local) == 4
    cov_rows = local[local["quantity"] == "cov"]
    np.testing.assert_allclose(cov_rows["truth"], -0.1)
    assert cov_rows["empirical"].notna().all()
    summary = result.summary
    assert set(summary["quantity"]) == {"cov11", "cov22", "cov21", "cov21_shared", "cov21_corr"}
    np.testing.assert_allclose(summary.loc[summary["quantity"] == "cov21_shared", "mean"], 0.0)


LONG_MCMC = {"n_burn": 1500, "n_keep": 2000, "field_thin": 5, "target_ess": 1.0}


@pytest.mark.slow
def test_predictive_intervals_cover_held_out_values(tmp_path):
    raw = tiny_experiment(
        tmp_path,
        experiment={"models": ["M2"], "seed": 21},
        grid={"resolution": 10},
        data={"simulation": {}},
        mcmc=LONG_MCMC,
    )
    config = build_experiment_config(raw)
    data, _ = load_dataset(config)
    train, test = split_dataset(config, data, 0)
    assert test.n_sites >= 200

    draws = fit_model(config, ModelFamily.M2, train, cell_seed(config, SEED_CHAIN, 0, ModelFamily.M2))
    pred = predict_responses(draws, train, test, seed=5, max_draws=400)
    lo = np.quantile(pred.values, 0.025, axis=0)
    hi = np.quantile(pred.values, 0.975, axis=0)
    inside = (test.y >= lo) & (test.y <= hi)
    coverage = inside[test.mask].mean()
    assert 0.88 <= coverage <= 0.99


@pytest.mark.slow
def test_preferential_model_interval_covers_true_local_covariance(tmp_path):
    raw = tiny_experiment(
        tmp_path,
        experiment={"models": ["M4"]},
        grid={"resolution": 10},
        data={"simulation": {"preset": "dependence_data1"}},
        dependence={"enabled": True, "models": ["M4"], "samples": ["all"], "n_distances": 5},
        mcmc=LONG_MCMC,
    )
    config = build_experiment_config(raw)
    data, truth = load_dataset(config)
    result = run_dependence(config, data, truth)

    cov = result.local[result.local["quantity"] == "cov"].iloc[0]
    assert cov["truth"] == pytest.approx(-0.1)
    assert cov["q025"] <= -0.1 <= cov["q975"]
