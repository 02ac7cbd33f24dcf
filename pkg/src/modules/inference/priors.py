"""
Prior distributions. Defaults are the weakly informative set used for every
simulation design: N(0, 100) for regression-type coefficients, IG(2, 0.1) for
variances and U(0, 100) for decay rates.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np
from scipy import stats

from utils.utils.exceptions import ConfigurationError


@dataclass(frozen=True)
class NormalPrior:
    """Independent N(mean, var) on every coordinate"""
    mean: float = 0.0
    var: float = 100.0

    @property
    def support(self) -> Tuple[float, float]:
        return (-np.inf, np.inf)

    @property
    def precision(self) -> float:
        return 1.0 / self.var

    def logpdf(self, x) -> float:
        return float(np.sum(stats.norm.logpdf(x, loc=self.mean, scale=np.sqrt(self.var))))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mean, np.sqrt(self.var), size)


@dataclass(frozen=True)
class InverseGammaPrior:
    """IG(shape, scale) with density proportional to x^(-shape-1) exp(-scale/x)"""
    shape: float = 2.0
    scale: float = 0.1

    @property
    def support(self) -> Tuple[float, float]:
        return (0.0, np.inf)

    @property
    def mean(self) -> float:
        return self.scale / (self.shape - 1.0) if self.shape > 1 else np.inf

    def logpdf(self, x) -> float:
        return float(np.sum(stats.invgamma.logpdf(x, self.shape, scale=self.scale)))

    def sample(self, rng: np.random.Generator, size=None):
        return self.scale / rng.gamma(self.shape, 1.0, size)


@dataclass(frozen=True)
class UniformPrior:
    """U(low, high)"""
    low: float = 0.0
    high: float = 100.0

    @property
    def support(self) -> Tuple[float, float]:
        return (self.low, self.high)

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def logpdf(self, x) -> float:
        return float(np.sum(stats.uniform.logpdf(x, loc=self.low, scale=self.high - self.low)))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.low, self.high, size)


Prior = Union[NormalPrior, InverseGammaPrior, UniformPrior]


@dataclass(frozen=True)
class PriorSet:
    """One prior per parameter group"""
    alpha: NormalPrior = field(default_factory=NormalPrior)
    beta: NormalPrior = field(default_factory=NormalPrior)
    gamma: NormalPrior = field(default_factory=NormalPrior)
    coreg: NormalPrior = field(default_factory=NormalPrior)
    sigma2: Prior = field(default_factory=InverseGammaPrior)
    phi: Prior = field(default_factory=UniformPrior)
    phi_w: Prior = field(default_factory=UniformPrior)
    tau2: InverseGammaPrior = field(default_factory=InverseGammaPrior)


def priors_default() -> PriorSet:
    """alpha, beta, gamma, a ~ N(0, 100); sigma2, tau2 ~ IG(2, 0.1); phi ~ U(0, 100)"""
    return PriorSet()


_KINDS = {"normal": NormalPrior, "inverse_gamma": InverseGammaPrior, "uniform": UniformPrior}
_GROUP_KINDS = {
    "alpha": ("normal",),
    "beta": ("normal",),
    "gamma": ("normal",),
    "coreg": ("normal",),
    "sigma2": ("inverse_gamma", "uniform"),
    "phi": ("uniform", "inverse_gamma"),
    "phi_w": ("uniform", "inverse_gamma"),
    "tau2": ("inverse_gamma",),
}


def priors_from_config(overrides: Optional[Mapping[str, Mapping[str, Any]]]) -> PriorSet:
    """
    Build a PriorSet from config overrides such as
    ``{"phi": {"kind": "uniform", "low": 0, "high": 30}}``. Conjugate blocks
    (coefficients, nuggets) keep their conjugate family.
    """
    base = priors_default()
    if not overrides:
        return base
    chosen: Dict[str, Prior] = {}
    for group, spec in overrides.items():
        if group not in _GROUP_KINDS:
            raise ConfigurationError(f"Unknown prior group '{group}'")
        spec = dict(spec or {})
        kind = spec.pop("kind", _GROUP_KINDS[group][0])
        if kind not in _GROUP_KINDS[group]:
            raise ConfigurationError(f"Prior for '{group}' must be one of {_GROUP_KINDS[group]}, got '{kind}'")
        try:
            prior = _KINDS[kind](**spec)
        except TypeError as e:
            raise ConfigurationError(f"Bad parameters for {group} prior: {e}") from e
        if isinstance(prior, UniformPrior) and not prior.high > prior.low:
            raise ConfigurationError(f"Uniform prior for '{group}' needs high > low")
        if isinstance(prior, InverseGammaPrior) and not (prior.shape > 0 and prior.scale > 0):
            raise ConfigurationError(f"Inverse-gamma prior for '{group}' needs positive shape and scale")
        if isinstance(prior, NormalPrior) and not prior.var > 0:
            raise ConfigurationError(f"Normal prior for '{group}' needs positive variance")
        chosen[group] = prior
    return PriorSet(**{**base.__dict__, **chosen})
