import numpy as np
import pytest

from modules.inference.priors import (
    InverseGammaPrior,
    NormalPrior,
    UniformPrior,
    priors_default,
    priors_from_config,
)
from utils.utils.exceptions import ConfigurationError


def test_default_gamma_density_at_zero():
    priors = priors_default()
    assert np.exp(priors.gamma.logpdf(0.0)) == pytest.approx(1.0 / np.sqrt(200.0 * np.pi))


def test_default_phi_support():
    assert priors_default().phi.support == (0.0, 100.0)


def test_inverse_gamma_mean():
    assert InverseGammaPrior(2.0, 0.1).mean == pytest.approx(0.1)


def test_inverse_gamma_sampler_matches_density(rng):
    from scipy import stats

    prior = InverseGammaPrior(3.0, 2.0)
    draws = prior.sample(rng, 20_000)
    assert stats.kstest(draws, stats.invgamma(3.0, scale=2.0).cdf).pvalue > 0.001


def test_uniform_density_outside_support():
    assert UniformPrior(0.0, 100.0).logpdf(150.0) == -np.inf


def test_normal_logpdf_sums_coordinates():
    prior = NormalPrior(0.0, 100.0)
    assert prior.logpdf(np.zeros(3)) == pytest.approx(3 * prior.logpdf(0.0))


def test_config_override():
    priors = priors_from_config({"phi": {"kind": "uniform", "low": 0.0, "high": 30.0}, "tau2": {"shape": 3.0}})
    assert priors.phi == UniformPrior(0.0, 30.0)
    assert priors.tau2 == InverseGammaPrior(3.0, 0.1)
    assert priors.sigma2 == InverseGammaPrior(2.0, 0.1)


@pytest.mark.parametrize(
    "overrides",
    [
        {"unknown": {}},
        {"tau2": {"kind": "uniform"}},
        {"phi": {"kind": "uniform", "low": 5.0, "high": 1.0}},
        {"sigma2": {"shape": -1.0}},
        {"beta": {"var": 0.0}},
        {"gamma": {"mean": 0.0, "spread": 1.0}},
    ],
)
def test_bad_overrides_rejected(overrides):
    with pytest.raises(ConfigurationError):
        priors_from_config(overrides)
