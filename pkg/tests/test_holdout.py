import numpy as np
import pytest

from modules.evaluation.holdout import (
    HoldoutSpec,
    HoldoutStrategy,
    biased_pair_sample,
    ceil_count,
    floor_count,
    make_holdout,
)
from modules.experiments.config import build_experiment_config
from modules.experiments.simulate import simulate_experiment
from modules.inference.model import BivariateDataset, Scenario
from modules.spatial.covariates import InterceptCovariates
from modules.spatial.domain_grid import Region
from utils.utils.exceptions import ValidationError

from conftest import make_dataset, tiny_experiment


def _ranked(n=10):
    """Sites whose y1 rank is their index reversed (site 0 has the largest y1)"""
    r = np.random.default_rng(0)
    sites = r.uniform(0.1, 0.9, (n, 2))
    y = np.column_stack([np.arange(n, 0, -1, dtype=float), r.normal(size=n)])
    return BivariateDataset(sites, y, np.ones((n, 2), bool), Region(), InterceptCovariates())


def test_random_split_halves_the_sites():
    data = _ranked()
    train, test = make_holdout(data, HoldoutSpec(HoldoutStrategy.RANDOM, p=0.0, seed=1))
    assert train.n_sites == 5 and test.n_sites == 5
    assert not set(train.site_ids) & set(test.site_ids)


def test_descending_split_keeps_top_values_then_random():
    data = _ranked()
    train, _ = make_holdout(data, HoldoutSpec(HoldoutStrategy.DESCENDING_Y1, p=0.2, seed=2))
    assert train.n_sites == 5
    assert {0, 1} <= set(train.site_ids)


def test_descending_split_at_half_is_the_top_half():
    data = _ranked()
    train, test = make_holdout(data, HoldoutSpec(HoldoutStrategy.DESCENDING_Y1, p=0.5, seed=3))
    assert sorted(train.site_ids) == [0, 1, 2, 3, 4]
    assert test.y[:, 0].max() < train.y[:, 0].min()


def test_split_is_seeded():
    data = make_dataset(n=40)
    spec = HoldoutSpec(HoldoutStrategy.DESCENDING_Y2, p=0.2, seed=9)
    a, _ = make_holdout(data, spec)
    b, _ = make_holdout(data, spec)
    np.testing.assert_array_equal(a.site_ids, b.site_ids)


def test_overlapping_split_shares_a_common_block():
    data = _ranked()
    spec = HoldoutSpec(HoldoutStrategy.DESCENDING_Y1, p=0.2, scenario=Scenario.OVERLAPPING, seed=4)
    train, test = make_holdout(data, spec)
    assert train.mask.sum(axis=0).tolist() == [5, 5]
    assert test.mask.sum(axis=0).tolist() == [5, 5]
    both = train.site_ids[train.mask.all(axis=1)]
    assert {0, 1} <= set(both)


def test_disjoint_split_handles_each_pattern():
    r = np.random.default_rng(5)
    n1, n2 = 10, 20
    y = np.full((n1 + n2, 2), np.nan)
    y[:n1, 0] = r.normal(size=n1)
    y[n1:, 1] = r.normal(size=n2)
    mask = np.isfinite(y)
    data = BivariateDataset(r.uniform(0.1, 0.9, (n1 + n2, 2)), y, mask, Region(), InterceptCovariates())
    spec = HoldoutSpec(HoldoutStrategy.DESCENDING_Y2, p=0.2, scenario=Scenario.DISJOINT, seed=6)
    train, test = make_holdout(data, spec)
    assert train.mask.sum(axis=0).tolist() == [5, 10]
    assert test.mask.sum(axis=0).tolist() == [5, 10]
    top4 = np.argsort(-y[n1:, 1])[:4] + n1
    assert set(top4) <= set(train.site_ids)


def test_spec_validates_fractions():
    with pytest.raises(ValidationError):
        HoldoutSpec(HoldoutStrategy.RANDOM, p=0.6, train_fraction=0.5)
    assert HoldoutSpec("descending_y2").label == "II-b"


def test_counts_are_stable_under_rounding():
    assert floor_count(10, 0.3) == 3
    assert ceil_count(10, 0.7) == 7
    assert ceil_count(624, 0.7) == 437


def test_biased_sample_keeps_largest_sites():
    data = make_dataset(n=624, seed=7)
    sub = biased_pair_sample(data, 0.7)
    assert sub.n_sites == 437
    assert sub.y[:, 0].min() >= np.sort(data.y[:, 0])[-437]
    assert sub.is_shared()


def test_biased_sample_of_everything_is_identity():
    data = make_dataset(n=15, seed=8)
    sub = biased_pair_sample(data, 1.0)
    np.testing.assert_array_equal(sub.site_ids, data.site_ids)


def test_biased_sample_of_monotone_response():
    data = _ranked(20)
    sub = biased_pair_sample(data, 0.25)
    assert list(sub.site_ids) == [0, 1, 2, 3, 4]
    with pytest.raises(ValidationError):
        biased_pair_sample(data, 0.0)


def test_descending_split_favours_large_values_on_preferential_data(tmp_path):
    config = build_experiment_config(
        tiny_experiment(tmp_path, grid={"resolution": 10}, data={"simulation": {}})
    )
    means = {"random": [], 0.2: [], 0.35: []}
    for seed in range(10):
        data, _ = simulate_experiment(config, seed=100 + seed)
        train, _ = make_holdout(data, HoldoutSpec(HoldoutStrategy.RANDOM, p=0.0, seed=seed))
        means["random"].append(np.mean(train.y[:, 0]))
        for p in (0.2, 0.35):
            train, _ = make_holdout(data, HoldoutSpec(HoldoutStrategy.DESCENDING_Y1, p=p, seed=seed))
            means[p].append(np.mean(train.y[:, 0]))
    assert np.mean(means[0.2]) > np.mean(means["random"])
    assert np.mean(means[0.35]) > np.mean(means[0.2])
