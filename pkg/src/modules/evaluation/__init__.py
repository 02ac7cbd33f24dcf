"""Holdout construction and predictive scoring"""
from .holdout import HoldoutSpec, HoldoutStrategy, biased_pair_sample, make_holdout
from .scoring import ScoreReport, crps_empirical, crps_gaussian, crps_sites, rmse, score_predictions

__all__ = [
    "HoldoutSpec",
    "HoldoutStrategy",
    "biased_pair_sample",
    "make_holdout",
    "ScoreReport",
    "crps_empirical",
    "crps_gaussian",
    "crps_sites",
    "rmse",
    "score_predictions",
]
