"""Shared fixtures: small grids and hand-built datasets"""
import numpy as np
import pytest
import yaml

from modules.inference.model import BivariateDataset
from modules.spatial.covariates import CenteredCoordinateCovariates, InterceptCovariates
from modules.spatial.domain_grid import Region, build_grid


@pytest.fixture
def unit_region():
    return Region()


@pytest.fixture
def grid4(unit_region):
    return build_grid(unit_region, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(n=12, seed=0, mask=None, covariates=None):
    """Both responses at n uniform sites on the unit square"""
    r = np.random.default_rng(seed)
    sites = r.uniform(0.05, 0.95, size=(n, 2))
    y = np.column_stack([r.normal(0.0, 1.0, n), r.normal(0.0, 1.0, n)])
    if mask is None:
        mask = np.ones((n, 2), dtype=bool)
    y = np.where(mask, y, np.nan)
    return BivariateDataset(
        sites=sites,
        y=y,
        mask=mask,
        region=Region(),
        covariates=covariates or CenteredCoordinateCovariates(),
    )


@pytest.fixture
def small_dataset():
    return make_dataset()


@pytest.fixture
def intercept_dataset():
    return make_dataset(n=8, seed=3, covariates=InterceptCovariates())


def tiny_experiment(out_dir, **sections):
    """A small simulated experiment (around 30 sites, 5x5 grid, short chains)"""
    raw = {
        "experiment": {"name": "tiny", "seed": 7, "models": ["M1", "M2"], "output_dir": str(out_dir),
                       "save_traces": False},
        "grid": {"resolution": 5},
        "data": {"source": "simulate", "simulation": {"alpha": [3.5, 0.0]}},
        "holdouts": [{"strategy": "random", "p": 0.0}, {"strategy": "descending_y1", "p": 0.2}],
        "mcmc": {"n_burn": 10, "n_keep": 20, "field_thin": 5, "target_ess": 1.0},
        "prediction": {"max_draws": 4},
    }
    for name, value in sections.items():
        raw[name] = {**raw.get(name, {}), **value}
    return raw


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(tiny_experiment(tmp_path / "out"), f)
    return path
