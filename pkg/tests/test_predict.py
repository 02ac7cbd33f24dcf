import numpy as np
import pandas as pd
import pytest
from scipy import stats

from modules.inference.mcmc import McmcConfig, PosteriorDraws, run_chain
from modules.inference.model import BivariateDataset, ModelFamily, Scenario
from modules.inference.predict import (
    PredictiveDraws,
    dependence_curves,
    dependence_summary,
    empirical_dependence,
    log_intensity_surface,
    predict_responses,
)
from modules.spatial.covariance import CoregCoef, ExpKernelParams, PSCoef
from modules.spatial.covariates import CenteredCoordinateCovariates, InterceptCovariates
from modules.spatial.domain_grid import Region, build_grid
from modules.spatial.gp_sim import simulate_gp
from modules.spatial.lgcp import PointPattern
from utils.utils.exceptions import ConfigurationError

from conftest import make_dataset

UNIT_GRID4 = {"xmin": 0.0, "xmax": 1.0, "ymin": 0.0, "ymax": 1.0, "nx": 4, "ny": 4}


def _const(n, value):
    return np.full(n, float(value))


def _m1_draws(n=2000, seed=0):
    r = np.random.default_rng(seed)
    traces = {
        "alpha1_0": _const(n, 3.0), "alpha1_1": _const(n, 0.0),
        "beta1_0": r.normal(1.0, 0.3, n), "beta1_1": _const(n, 2.0),
        "beta2_0": _const(n, 0.0), "beta2_1": _const(n, -1.0),
        "sigma2_eta1": _const(n, 0.5), "phi_eta1": _const(n, 3.0),
        "tau2_1": _const(n, 0.25), "tau2_2": _const(n, 0.5),
    }
    return PosteriorDraws(
        family="M1", scenario="shared", traces=traces,
        fields={"eta1": np.zeros((n, 16))}, field_draw_index=np.arange(n),
        meta={"grid": UNIT_GRID4, "fix_response_mean": False, "separable": False},
    )


def _dependence_draws(gamma, coreg, n=5, family="M4"):
    traces = {
        "a11": _const(n, coreg[0]), "a21": _const(n, coreg[1]), "a22": _const(n, coreg[2]),
        "sigma2_eta1": _const(n, 1.0), "phi_eta1": _const(n, 1.0),
        "phi_w1": _const(n, 1.0), "phi_w2": _const(n, 1.0),
        "tau2_1": _const(n, 0.1), "tau2_2": _const(n, 0.1),
    }
    if family == "M4":
        traces["gamma1"], traces["gamma2"] = _const(n, gamma[0]), _const(n, gamma[1])
    return PosteriorDraws(family, "shared", traces, {}, np.zeros(0, int), meta={"grid": UNIT_GRID4})


def test_independent_model_predictive_moments():
    train = make_dataset()
    draws = _m1_draws()
    sites = np.array([[0.3, 0.2], [0.7, 0.9]])
    pred = predict_responses(draws, train, sites, seed=1)
    assert pred.values.shape == (2000, 2, 2)

    x0 = CenteredCoordinateCovariates()(sites)
    mean1 = x0 @ np.array([1.0, 2.0])
    mean2 = x0 @ np.array([0.0, -1.0])
    np.testing.assert_allclose(pred.mean()[:, 0], mean1, atol=0.06)
    np.testing.assert_allclose(pred.mean()[:, 1], mean2, atol=0.08)
    np.testing.assert_allclose(pred.response(0).var(axis=0), 0.25 + 0.09, rtol=0.15)
    np.testing.assert_allclose(pred.response(1).var(axis=0), 0.5, rtol=0.15)


def test_prediction_is_reproducible_and_thinned():
    train = make_dataset()
    draws = _m1_draws(n=50)
    a = predict_responses(draws, train, [[0.5, 0.5]], seed=7, max_draws=10)
    b = predict_responses(draws, train, [[0.5, 0.5]], seed=7, max_draws=10)
    assert a.n_draws == 10
    np.testing.assert_array_equal(a.values, b.values)


def test_prediction_rejects_foreign_family():
    with pytest.raises(ConfigurationError):
        predict_responses(_m1_draws(n=5), make_dataset(), [[0.5, 0.5]], family=ModelFamily.M2)


def test_long_frame_drops_unpredicted_response(tmp_path):
    values = np.random.default_rng(2).normal(size=(3, 2, 2))
    values[:, :, 1] = np.nan
    pred = PredictiveDraws(np.array([[0.1, 0.1], [0.2, 0.2]]), values, "uni_i", "shared", np.array([7, 9]))
    frame = pred.to_long_frame()
    assert len(frame) == 6
    assert set(frame["response"]) == {1}
    assert set(frame["site_id"]) == {7, 9}

    pred.save(tmp_path / "pred.npz")
    loaded = PredictiveDraws.load(tmp_path / "pred.npz")
    assert loaded.family == "uni_i"
    np.testing.assert_array_equal(loaded.site_ids, [7, 9])


def test_cross_covariance_splits_into_parts():
    h = np.linspace(0.0, 1.0, 11)
    curves = dependence_curves(
        PSCoef(1.0, 0.3), CoregCoef(1.0, -0.4, 1.0),
        ExpKernelParams(1.0, 1.0), ExpKernelParams(1.0, 1.0), ExpKernelParams(1.0, 1.0), h,
    )
    np.testing.assert_allclose(curves["cov21"], curves["cov21_shared"] + curves["cov21_corr"])
    np.testing.assert_allclose(curves["cov21_shared"], 0.3 * np.exp(-h))
    np.testing.assert_allclose(curves["cov21_corr"], -0.4 * np.exp(-h))
    assert curves["cov11"][0] == pytest.approx(2.0)


@pytest.mark.parametrize("gamma2, local_cov", [(0.3, -0.1), (-0.3, -0.7)])
def test_local_dependence_of_simulation_designs(gamma2, local_cov):
    summary = dependence_summary(_dependence_draws((1.0, gamma2), (1.0, -0.4, 1.0)))
    np.testing.assert_allclose(summary.local_cov, local_cov)
    assert summary.per_draw["cov21"][:, 0] == pytest.approx(local_cov)
    local = summary.local_summary()
    assert list(local["quantity"]) == ["cov", "corr"]
    assert local["mean"].iloc[0] == pytest.approx(local_cov)


def test_coregionalized_model_has_no_shared_part():
    summary = dependence_summary(_dependence_draws((0.0, 0.0), (1.0, 0.5, 0.8), family="M3"))
    assert np.all(summary.per_draw["cov21_shared"] == 0.0)
    np.testing.assert_allclose(summary.per_draw["cov21"], summary.per_draw["cov21_corr"])


def test_dependence_frames(tmp_path):
    summary = dependence_summary(_dependence_draws((1.0, 0.3), (1.0, -0.4, 1.0), n=4), distances=np.linspace(0, 1, 6))
    long = summary.to_long_frame()
    assert len(long) == 4 * 6
    curves = summary.curve_summary()
    assert len(curves) == 5 * 6
    assert "truth" not in curves.columns


def test_dependence_needs_coregionalized_family():
    with pytest.raises(ConfigurationError):
        dependence_summary(_m1_draws(n=5))


def test_empirical_dependence_over_paired_sites():
    data = make_dataset(n=30, seed=4)
    expected = np.cov(data.y[:, 0], data.y[:, 1])[0, 1]
    out = empirical_dependence(data)
    assert out["cov"] == pytest.approx(expected)
    assert -1.0 <= out["corr"] <= 1.0
    assert out["n"] == 30


def test_log_intensity_surface_columns():
    draws = _m1_draws(n=20)
    frame = log_intensity_surface(draws, CenteredCoordinateCovariates())
    assert list(frame.columns) == ["cell", "x", "y", "mean", "q025", "q975"]
    assert len(frame) == 16
    np.testing.assert_allclose(frame["mean"], 3.0)
    assert isinstance(frame, pd.DataFrame)


def _split_halves_dataset(y2_shift=0.0):
    """Response 1 observed on the left half only, response 2 on the right half"""
    region = Region()
    grid = build_grid(region, 6)
    w1 = simulate_gp(grid, ExpKernelParams(1.0, 2.0), 60)
    w2 = simulate_gp(grid, ExpKernelParams(1.0, 2.0), 61)
    r = np.random.default_rng(62)
    left = np.column_stack([r.uniform(0.02, 0.48, 40), r.uniform(0.02, 0.98, 40)])
    right = np.column_stack([r.uniform(0.52, 0.98, 40), r.uniform(0.02, 0.98, 40)])
    c1, c2 = grid.nearest_centroids(left), grid.nearest_centroids(right)
    y1 = w1.values[c1] + r.normal(0.0, 0.2, 40)
    y2 = 0.9 * w1.values[c2] + 0.3 * w2.values[c2] + r.normal(0.0, 0.2, 40) + y2_shift
    data = BivariateDataset.from_patterns(
        PointPattern(left, region), y1, PointPattern(right, region), y2, InterceptCovariates()
    )
    return grid, data, right


@pytest.mark.slow
def test_disjoint_prediction_borrows_from_the_other_response():
    config = McmcConfig(n_burn=1000, n_keep=1500, field_thin=5, seed=63, target_ess=1.0)
    means = []
    for shift in (0.0, 3.0):
        grid, data, right = _split_halves_dataset(shift)
        draws = run_chain(Scenario.DISJOINT, ModelFamily.M1STAR, data, config, grid=grid, fix_response_mean=True)
        pred = predict_responses(draws, data, right, seed=64, max_draws=300)
        means.append(pred.mean()[:, 0])
    assert stats.ttest_rel(means[0], means[1]).pvalue < 0.01
