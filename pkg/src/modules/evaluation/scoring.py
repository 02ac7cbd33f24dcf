"""
Predictive scores: RMSE of predictive means and CRPS of predictive draws,
per response and summed over responses
"""
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np
from scipy import stats

from modules.inference.model import BivariateDataset
from modules.inference.predict import PredictiveDraws
from utils.utils.exceptions import ValidationError

SCORE_COLUMNS = ("rmse1", "rmse2", "rmse_sum", "crps1", "crps2", "crps_sum")


def rmse(pred_means: np.ndarray, truths: np.ndarray) -> float:
    pred_means = np.asarray(pred_means, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if pred_means.shape != truths.shape:
        raise ValidationError(f"Predictions {pred_means.shape} and truths {truths.shape} are not aligned")
    if truths.size == 0:
        raise ValidationError("Empty test set")
    return float(np.sqrt(np.mean((pred_means - truths) ** 2)))


def crps_sites(pred_draws: np.ndarray, truths: np.ndarray) -> np.ndarray:
    """
    Per-site CRPS from draws of shape (M, n_sites):
    mean|y_m - y| - sum_{m,m'} |y_m - y_m'| / (2 M^2), the pair sum taken from sorted draws.
    """
    draws = np.asarray(pred_draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    truths = np.atleast_1d(np.asarray(truths, dtype=float))
    m = draws.shape[0]
    if m < 2:
        raise ValidationError("CRPS needs at least two predictive draws")
    if draws.shape[1] != truths.size:
        raise ValidationError(f"{draws.shape[1]} draw columns for {truths.size} truths")
    first = np.mean(np.abs(draws - truths[None, :]), axis=0)
    ordered = np.sort(draws, axis=0)
    weights = 2.0 * np.arange(1, m + 1) - m - 1
    pair_sum = 2.0 * (weights @ ordered)
    return first - pair_sum / (2.0 * m * m)


def crps_empirical(pred_draws: np.ndarray, truth) -> float:
    """Empirical CRPS averaged over sites"""
    values = crps_sites(pred_draws, truth)
    if values.size == 0:
        raise ValidationError("Empty test set")
    return float(np.mean(values))


def crps_gaussian(mu, sigma, y) -> np.ndarray:
    """Closed-form CRPS of N(mu, sigma^2) at y"""
    sigma = np.asarray(sigma, dtype=float)
    z = (np.asarray(y, dtype=float) - mu) / sigma
    return sigma * (z * (2.0 * stats.norm.cdf(z) - 1.0) + 2.0 * stats.norm.pdf(z) - 1.0 / np.sqrt(np.pi))


@dataclass(frozen=True)
class ScoreReport:
    rmse1: float
    rmse2: float
    rmse_sum: float
    crps1: float
    crps2: float
    crps_sum: float

    @classmethod
    def from_parts(cls, rmse1: float, rmse2: float, crps1: float, crps2: float) -> "ScoreReport":
        """Combined scores add the per-response ones; a missing response (NaN) adds nothing"""
        return cls(
            rmse1=rmse1,
            rmse2=rmse2,
            rmse_sum=float(np.nansum([rmse1, rmse2])),
            crps1=crps1,
            crps2=crps2,
            crps_sum=float(np.nansum([crps1, crps2])),
        )

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def score_predictions(predictive: PredictiveDraws, test: BivariateDataset) -> ScoreReport:
    """Score each response over the test sites where it was held out and is predicted"""
    if predictive.values.shape[1] != test.n_sites:
        raise ValidationError("Predictive draws and test set have different site counts")
    parts: Dict[str, Optional[float]] = {}
    for j in range(2):
        draws = predictive.values[:, :, j]
        rows = np.flatnonzero(test.mask[:, j] & np.all(np.isfinite(draws), axis=0))
        if rows.size == 0:
            parts[f"rmse{j + 1}"] = float("nan")
            parts[f"crps{j + 1}"] = float("nan")
            continue
        truths = test.y[rows, j]
        parts[f"rmse{j + 1}"] = rmse(draws[:, rows].mean(axis=0), truths)
        parts[f"crps{j + 1}"] = crps_empirical(draws[:, rows], truths)
    if all(np.isnan(v) for v in parts.values()):
        raise ValidationError("No held-out responses to score")
    return ScoreReport.from_parts(parts["rmse1"], parts["rmse2"], parts["crps1"], parts["crps2"])
