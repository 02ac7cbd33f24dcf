"""
Simulated datasets for the study designs: latent fields on the grid, point
pattern(s) by thinning, then responses at the nearest centroid of each site
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from loguru import logger

from modules.inference.model import BivariateDataset, Scenario
from modules.inference.predict import dependence_curves
from modules.spatial.covariance import CoregCoef, ExpKernelParams, PSCoef, local_cov_corr
from modules.spatial.covariates import CenteredCoordinateCovariates, CovariateProvider, InterceptCovariates
from modules.spatial.domain_grid import GridApprox, Region, build_grid
from modules.spatial.gp_sim import GpField, simulate_gp
from modules.spatial.lgcp import IntensityModel, PointPattern, simulate_lgcp
from utils.utils.exceptions import ConfigurationError, ValidationError
from utils.utils.seeding import SeedLike, derive_seed

from .config import ExperimentConfig, SimulationConfig

# component keys for derived random streams
ETA1, ETA2, W1, W2, PATTERN1, PATTERN2, NOISE = range(7)


@dataclass
class SimulationTruth:
    """Generating parameters and latent fields of a simulated dataset"""
    scenario: str
    params: Dict[str, Any]
    fields: Dict[str, np.ndarray] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def ps(self) -> PSCoef:
        g = self.params["gamma"]
        return PSCoef(g[0], g[1])

    @property
    def coreg(self) -> CoregCoef:
        return CoregCoef(**self.params["coreg"])

    def kernels(self) -> Tuple[ExpKernelParams, ExpKernelParams, ExpKernelParams]:
        p = self.params
        return ExpKernelParams(**p["eta"]), ExpKernelParams(**p["w1"]), ExpKernelParams(**p["w2"])

    def dependence_curves(self, distances: np.ndarray) -> Dict[str, np.ndarray]:
        eta_k, w1_k, w2_k = self.kernels()
        return dependence_curves(self.ps, self.coreg, eta_k, w1_k, w2_k, distances)

    def local_dependence(self) -> Dict[str, float]:
        eta_k, w1_k, w2_k = self.kernels()
        cov, corr = local_cov_corr(self.ps, self.coreg, eta_k.sigma2, w1_k.sigma2, w2_k.sigma2)
        return {"cov": cov, "corr": corr}

    def to_dict(self) -> Dict[str, Any]:
        return {"scenario": self.scenario, "seed": self.seed, "counts": self.counts, "params": self.params}

    def save(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def covariate_provider(kind: str, region: Region) -> CovariateProvider:
    if kind == "centered_y":
        return CenteredCoordinateCovariates(center=0.5 * (region.ymin + region.ymax))
    if kind == "intercept":
        return InterceptCovariates()
    raise ConfigurationError(f"Unknown covariate kind '{kind}'")


def experiment_grid(config: ExperimentConfig, region: Optional[Region] = None) -> GridApprox:
    if region is None:
        r = config.grid.region
        region = Region(r.xmin, r.xmax, r.ymin, r.ymax) if r is not None else Region()
    return build_grid(region, config.grid.resolution)


def _kernel(k) -> ExpKernelParams:
    return ExpKernelParams(k.sigma2, k.phi)


def _responses(
    sim: SimulationConfig,
    j: int,
    x: np.ndarray,
    cells: np.ndarray,
    eta: GpField,
    w1: GpField,
    w2: GpField,
    rng: np.random.Generator,
) -> np.ndarray:
    beta = np.asarray(sim.beta1 if j == 0 else sim.beta2, dtype=float)
    mean = np.zeros(cells.size) if sim.fix_response_mean else x @ beta
    mean = mean + sim.gamma[j] * eta.values[cells]
    if j == 0:
        mean = mean + sim.coreg.a11 * w1.values[cells]
    else:
        mean = mean + sim.coreg.a21 * w1.values[cells] + sim.coreg.a22 * w2.values[cells]
    return mean + np.sqrt(sim.tau2[j]) * rng.standard_normal(cells.size)


def simulate_experiment(config: ExperimentConfig, seed: SeedLike = None) -> Tuple[BivariateDataset, SimulationTruth]:
    """
    Shared and overlapping scenarios draw one pattern with both responses at
    every site (overlap comes from the holdout). The disjoint scenario draws
    two independent patterns, each from its own latent field, and observes
    response j on pattern j only.
    """
    if config.data.source != "simulate" or config.data.simulation is None:
        raise ConfigurationError("simulate_experiment needs data.source = 'simulate'")
    sim = config.data.simulation
    scenario = config.experiment.scenario
    root = config.experiment.seed if seed is None else seed
    grid = experiment_grid(config)
    covars = covariate_provider(sim.covariates, grid.region)

    eta_k = _kernel(sim.eta)
    eta1 = simulate_gp(grid, eta_k, derive_seed(root, ETA1))
    w1 = simulate_gp(grid, _kernel(sim.w1), derive_seed(root, W1))
    w2 = simulate_gp(grid, _kernel(sim.w2), derive_seed(root, W2))
    noise_rng = np.random.Generator(np.random.PCG64(derive_seed(root, NOISE)))

    fields = {"eta1": eta1.values, "w1": w1.values, "w2": w2.values}
    if scenario is Scenario.DISJOINT:
        eta2 = simulate_gp(grid, _kernel(sim.eta2 or sim.eta), derive_seed(root, ETA2))
        fields["eta2"] = eta2.values
        p1 = simulate_lgcp(IntensityModel(sim.alpha, eta1), covars, grid, derive_seed(root, PATTERN1))
        p2 = simulate_lgcp(IntensityModel(sim.alpha, eta2), covars, grid, derive_seed(root, PATTERN2))
        if len(p1) < 2 or len(p2) < 2:
            raise ValidationError(f"Simulated patterns are degenerate (n1={len(p1)}, n2={len(p2)})")
        y1 = _responses(sim, 0, covars(p1.locations), grid.nearest_centroids(p1.locations), eta1, w1, w2, noise_rng)
        y2 = _responses(sim, 1, covars(p2.locations), grid.nearest_centroids(p2.locations), eta2, w1, w2, noise_rng)
        data = BivariateDataset.from_patterns(p1, y1, p2, y2, covars)
        counts = {"n1": len(p1), "n2": len(p2)}
    else:
        pattern = simulate_lgcp(IntensityModel(sim.alpha, eta1), covars, grid, derive_seed(root, PATTERN1))
        if len(pattern) < 2:
            raise ValidationError(f"Simulated pattern is degenerate (n={len(pattern)})")
        x = covars(pattern.locations)
        cells = grid.nearest_centroids(pattern.locations)
        y1 = _responses(sim, 0, x, cells, eta1, w1, w2, noise_rng)
        y2 = _responses(sim, 1, x, cells, eta1, w1, w2, noise_rng)
        data = BivariateDataset.from_patterns(pattern, y1, pattern, y2, covars, shared=True)
        counts = {"n": len(pattern)}

    params = sim.model_dump(exclude={"preset"})
    params["gamma"] = list(sim.gamma)
    params["tau2"] = list(sim.tau2)
    params["eta2"] = (sim.eta2 or sim.eta).model_dump() if scenario is Scenario.DISJOINT else None
    truth = SimulationTruth(
        scenario=scenario.value,
        params=params,
        fields=fields,
        counts=counts,
        seed=root if isinstance(root, int) else None,
    )
    logger.info(f"Simulated {scenario.value} dataset: {counts} (preset {sim.preset or 'custom'})")
    return data, truth
