import numpy as np
import pytest

from modules.evaluation.scoring import (
    ScoreReport,
    crps_empirical,
    crps_gaussian,
    crps_sites,
    rmse,
    score_predictions,
)
from modules.inference.predict import PredictiveDraws
from utils.utils.exceptions import ValidationError

from conftest import make_dataset


def test_crps_is_zero_for_exact_draws():
    truth = np.array([1.5, -2.0, 0.0])
    draws = np.tile(truth, (50, 1))
    np.testing.assert_allclose(crps_sites(draws, truth), 0.0, atol=1e-12)


def test_crps_matches_gaussian_closed_form():
    rng = np.random.default_rng(0)
    draws = rng.normal(0.5, 2.0, size=(100_000, 1))
    for y in (-1.0, 0.5, 3.0):
        assert crps_empirical(draws, [y]) == pytest.approx(float(crps_gaussian(0.5, 2.0, y)), abs=1e-2)


def test_crps_pair_term_matches_brute_force():
    rng = np.random.default_rng(1)
    draws = rng.normal(size=(40, 3))
    truth = rng.normal(size=3)
    brute = np.abs(draws - truth).mean(axis=0) - 0.5 * np.abs(draws[:, None, :] - draws[None, :, :]).mean(axis=(0, 1))
    np.testing.assert_allclose(crps_sites(draws, truth), brute)


def test_crps_needs_two_draws():
    with pytest.raises(ValidationError):
        crps_sites(np.zeros((1, 2)), np.zeros(2))


def test_crps_is_non_negative_and_order_free(rng):
    for m in (2, 7, 64):
        draws = rng.standard_t(3, size=(m, 40)) * rng.uniform(0.1, 5.0)
        truths = rng.normal(0.0, 3.0, 40)
        scores = crps_sites(draws, truths)
        assert np.all(scores >= -1e-12)
        shuffled = rng.permuted(draws, axis=0)
        np.testing.assert_allclose(crps_sites(shuffled, truths), scores, rtol=1e-12, atol=1e-14)


def test_rmse_basics():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    with pytest.raises(ValidationError):
        rmse([1.0], [1.0, 2.0])


def test_combined_scores_add_up():
    report = ScoreReport.from_parts(0.706, 0.342, 0.4, 0.2)
    assert report.rmse_sum == pytest.approx(1.048)
    assert report.crps_sum == pytest.approx(0.6)


def test_univariate_report_ignores_missing_response():
    report = ScoreReport.from_parts(0.5, float("nan"), 0.3, float("nan"))
    assert report.rmse_sum == pytest.approx(0.5)
    assert report.as_dict()["crps_sum"] == pytest.approx(0.3)


def test_score_predictions_uses_held_out_pairs():
    mask = np.ones((6, 2), dtype=bool)
    mask[:3, 1] = False
    test = make_dataset(n=6, seed=2, mask=mask)
    values = np.repeat(np.nan_to_num(test.y)[None], 10, axis=0)
    report = score_predictions(PredictiveDraws(test.sites, values, "M2", "overlapping"), test)
    assert report.rmse1 == pytest.approx(0.0)
    assert report.rmse2 == pytest.approx(0.0)
    assert report.crps_sum == pytest.approx(0.0, abs=1e-12)


def test_score_predictions_checks_alignment():
    test = make_dataset(n=4)
    values = np.zeros((5, 3, 2))
    with pytest.raises(ValidationError):
        score_predictions(PredictiveDraws(np.zeros((3, 2)) + 0.5, values, "M1", "shared"), test)
