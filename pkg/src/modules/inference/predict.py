"""
Posterior-predictive co-kriging at new locations, and posterior summaries of
the dependence between the two responses
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.spatial.distance import cdist

from modules.spatial.covariance import (
    CoregCoef,
    CovarianceFactor,
    ExpKernelParams,
    PSCoef,
    cross_cov_components,
    local_cov_corr,
)
from modules.spatial.covariates import CovariateProvider
from modules.spatial.domain_grid import GridApprox, LocationsLike
from modules.spatial.gp_sim import grid_factor
from utils.utils.exceptions import ConfigurationError, ValidationError
from utils.utils.performance_monitor import get_performance_monitor
from utils.utils.seeding import SeedLike, make_rng

from .mcmc import PosteriorDraws
from .model import BivariateDataset, ModelContext, ModelFamily, Scenario

DEPENDENCE_QUANTITIES = ("cov11", "cov22", "cov21", "cov21_shared", "cov21_corr")


@dataclass
class PredictiveDraws:
    """values has shape (n_draws, n_sites, 2); NaN marks a response the model does not predict"""
    sites: np.ndarray
    values: np.ndarray
    family: str
    scenario: str
    site_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[2] != 2 or self.values.shape[1] != len(self.sites):
            raise ValidationError(f"Predictive draws of shape {self.values.shape} do not match {len(self.sites)} sites")
        if self.site_ids is None:
            self.site_ids = np.arange(len(self.sites))

    @property
    def n_draws(self) -> int:
        return self.values.shape[0]

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def response(self, j: int) -> np.ndarray:
        """(n_draws, n_sites) draws of response j"""
        return self.values[:, :, j]

    def to_long_frame(self) -> pd.DataFrame:
        n_draws, n_sites, _ = self.values.shape
        draw, site, resp = np.meshgrid(np.arange(n_draws), np.arange(n_sites), np.arange(2), indexing="ij")
        frame = pd.DataFrame({
            "draw": draw.ravel(),
            "site_id": np.asarray(self.site_ids)[site.ravel()],
            "response": resp.ravel() + 1,
            "value": self.values.ravel(),
        })
        return frame.dropna(subset=["value"]).reset_index(drop=True)

    def save(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path, sites=self.sites, values=self.values, site_ids=self.site_ids,
            family=np.array(self.family), scenario=np.array(self.scenario),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PredictiveDraws":
        with np.load(Path(path), allow_pickle=False) as data:
            return cls(data["sites"], data["values"], str(data["family"]), str(data["scenario"]), data["site_ids"])


def _context_for(draws: PosteriorDraws, data: BivariateDataset,
                 family: Optional[ModelFamily], scenario: Optional[Scenario]) -> ModelContext:
    family = ModelFamily(family or draws.family)
    scenario = Scenario(scenario or draws.scenario)
    if family.value != draws.family:
        raise ConfigurationError(f"Draws were produced by {draws.family}, not {family.value}")
    return ModelContext(
        scenario, family, data, draws.grid,
        fix_response_mean=bool(draws.meta.get("fix_response_mean", False)),
        separable=bool(draws.meta.get("separable", False)),
    )


class _GridKriger:
    """Marginal conditional of a field at new sites given its values at every centroid"""

    def __init__(self, grid: GridApprox, sites: np.ndarray):
        self.grid = grid
        self.d0 = cdist(sites, grid.centroids)

    def conditional(self, params: ExpKernelParams, values: np.ndarray, factor: Optional[CovarianceFactor] = None):
        factor = factor or grid_factor(self.grid, params)
        k0 = params.sigma2 * np.exp(-params.phi * self.d0)
        v = factor.whiten(k0.T)
        mean = v.T @ factor.whiten(values)
        var = np.maximum(params.sigma2 - np.sum(v * v, axis=0), 0.0)
        return mean, var


def predict_responses(
    draws: PosteriorDraws,
    data: BivariateDataset,
    test_locations: Union[LocationsLike, BivariateDataset],
    family: Optional[ModelFamily] = None,
    scenario: Optional[Scenario] = None,
    seed: SeedLike = None,
    max_draws: Optional[int] = None,
) -> PredictiveDraws:
    """
    For every posterior draw carrying field snapshots: krige each latent field
    from the grid to the test sites, add the regression mean and the field
    loadings, then nugget noise. data is the training set the draws came from.
    """
    rng = make_rng(seed)
    ctx = _context_for(draws, data, family, scenario)
    if isinstance(test_locations, BivariateDataset):
        sites, site_ids = test_locations.sites, test_locations.site_ids
    else:
        sites, site_ids = test_locations, None
    sites = ctx.grid.region.require_inside(sites)
    n_sites = sites.shape[0]
    x0 = data.response_design(sites) if ctx.p_resp else np.zeros((n_sites, 0))
    kriger = _GridKriger(ctx.grid, sites)
    monitor = get_performance_monitor()

    out: List[np.ndarray] = []
    for _, state in draws.snapshot_states(ctx, max_draws):
        with monitor.timed("predict_draw"):
            latent: Dict[str, np.ndarray] = {}
            for name, gp in ctx.active_fields(state):
                mean, var = kriger.conditional(gp.params, gp.values)
                latent[name] = mean + np.sqrt(var) * rng.standard_normal(n_sites)
            values = np.full((n_sites, 2), np.nan)
            for j in ctx.responses:
                mu = x0 @ state.beta[j] if ctx.p_resp else np.zeros(n_sites)
                for name, load in ctx.loading(state, j).items():
                    if load != 0.0:
                        mu = mu + load * latent[name]
                values[:, j] = mu + np.sqrt(state.tau2[j]) * rng.standard_normal(n_sites)
            out.append(values)
    if not out:
        raise ValidationError("Posterior draws carry no field snapshots to predict from")
    logger.debug(f"Predicted {n_sites} sites from {len(out)} posterior draws ({ctx.family.value})")
    return PredictiveDraws(sites, np.stack(out), ctx.family.value, ctx.scenario.value, site_ids)


def dependence_curves(
    ps: PSCoef,
    coreg: CoregCoef,
    eta_k: ExpKernelParams,
    w1_k: ExpKernelParams,
    w2_k: ExpKernelParams,
    distances: np.ndarray,
) -> Dict[str, np.ndarray]:
    """cov11, cov22, cov21 and the split of cov21 into shared and coregionalized parts"""
    parts = cross_cov_components(ps, coreg, eta_k, w1_k, w2_k, np.asarray(distances, dtype=float))
    total = parts["shared"] + parts["coreg"]
    return {
        "cov11": total[..., 0, 0],
        "cov22": total[..., 1, 1],
        "cov21": total[..., 1, 0],
        "cov21_shared": parts["shared"][..., 1, 0],
        "cov21_corr": parts["coreg"][..., 1, 0],
    }


@dataclass
class DependenceSummary:
    """Per-draw dependence curves over a distance grid plus local (h = 0) cov/corr"""
    distances: np.ndarray
    per_draw: Dict[str, np.ndarray]
    local_cov: np.ndarray
    local_corr: np.ndarray
    family: str = ""
    truth: Optional[Dict[str, np.ndarray]] = None
    truth_local: Optional[Dict[str, float]] = None

    def curve_summary(self) -> pd.DataFrame:
        frames = []
        for name in DEPENDENCE_QUANTITIES:
            draws = self.per_draw[name]
            frame = pd.DataFrame({
                "quantity": name,
                "distance": self.distances,
                "mean": draws.mean(axis=0),
                "q025": np.quantile(draws, 0.025, axis=0),
                "q975": np.quantile(draws, 0.975, axis=0),
            })
            if self.truth is not None:
                frame["truth"] = self.truth[name]
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def local_summary(self) -> pd.DataFrame:
        rows = []
        for name, values in (("cov", self.local_cov), ("corr", self.local_corr)):
            row = {
                "quantity": name,
                "mean": float(np.mean(values)),
                "q025": float(np.quantile(values, 0.025)),
                "q975": float(np.quantile(values, 0.975)),
            }
            if self.truth_local is not None:
                row["truth"] = self.truth_local[name]
            rows.append(row)
        return pd.DataFrame(rows)

    def to_long_frame(self) -> pd.DataFrame:
        """One row per (draw, distance) with every quantity as a column"""
        n_draws, n_h = self.per_draw["cov21"].shape
        frame = pd.DataFrame({
            "draw": np.repeat(np.arange(n_draws), n_h),
            "distance": np.tile(self.distances, n_draws),
        })
        for name in DEPENDENCE_QUANTITIES:
            frame[name] = self.per_draw[name].ravel()
        return frame


def dependence_summary(
    draws: PosteriorDraws,
    family: Optional[ModelFamily] = None,
    distances: Optional[np.ndarray] = None,
    include_nugget: bool = False,
) -> DependenceSummary:
    """Evaluate the cross-covariance at every kept draw; gamma is zero for the coregionalized model"""
    family = ModelFamily(family or draws.family)
    if family not in (ModelFamily.M3, ModelFamily.M4):
        raise ConfigurationError(f"Dependence summaries need M3 or M4, got {family.value}")
    distances = np.linspace(0.0, 1.0, 51) if distances is None else np.asarray(distances, dtype=float)
    tr = draws.traces
    n = draws.n_draws
    zeros = np.zeros(n)
    g1 = tr.get("gamma1", zeros) if family is ModelFamily.M4 else zeros
    g2 = tr.get("gamma2", zeros) if family is ModelFamily.M4 else zeros
    a22 = tr.get("a22", zeros)

    per_draw = {name: np.empty((n, distances.size)) for name in DEPENDENCE_QUANTITIES}
    local_cov = np.empty(n)
    local_corr = np.empty(n)
    for i in range(n):
        ps = PSCoef(float(g1[i]), float(g2[i]))
        coreg = CoregCoef(float(tr["a11"][i]), float(tr["a21"][i]), float(a22[i]))
        eta_k = ExpKernelParams(float(tr["sigma2_eta1"][i]), float(tr["phi_eta1"][i]))
        w1_k = ExpKernelParams(1.0, float(tr["phi_w1"][i]))
        w2_k = ExpKernelParams(1.0, float(tr["phi_w2"][i])) if "phi_w2" in tr else ExpKernelParams(1.0, 1.0)
        curves = dependence_curves(ps, coreg, eta_k, w1_k, w2_k, distances)
        for name in DEPENDENCE_QUANTITIES:
            per_draw[name][i] = curves[name]
        local_cov[i], local_corr[i] = local_cov_corr(
            ps, coreg, eta_k.sigma2, 1.0, 1.0, include_nugget,
            float(tr["tau2_1"][i]) if include_nugget else 0.0,
            float(tr["tau2_2"][i]) if include_nugget else 0.0,
        )
    return DependenceSummary(distances, per_draw, local_cov, local_corr, family=family.value)


def empirical_dependence(data: BivariateDataset) -> Dict[str, float]:
    """Raw covariance and correlation of (Y1, Y2) over sites observing both"""
    both = data.mask.all(axis=1)
    if both.sum() < 2:
        return {"cov": float("nan"), "corr": float("nan"), "n": int(both.sum())}
    y = data.y[both]
    cov = np.cov(y[:, 0], y[:, 1])
    corr = cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]) if cov[0, 0] > 0 and cov[1, 1] > 0 else float("nan")
    return {"cov": float(cov[0, 1]), "corr": float(corr), "n": int(both.sum())}


def log_intensity_surface(draws: PosteriorDraws, covariates: CovariateProvider, k: int = 0) -> pd.DataFrame:
    """Posterior mean and 95% band of log-intensity at each grid centroid for pattern k"""
    grid = draws.grid
    name = f"eta{k + 1}"
    if name not in draws.fields:
        raise ValidationError(f"No snapshots of {name} in the posterior draws")
    x_grid = np.asarray(covariates(grid.centroids), dtype=float)
    alpha_names = [f"alpha{k + 1}_{i}" for i in range(x_grid.shape[1])]
    alpha = np.column_stack([draws.traces[a][draws.field_draw_index] for a in alpha_names]) if alpha_names else \
        np.zeros((draws.field_draw_index.size, 0))
    surfaces = alpha @ x_grid.T + draws.fields[name]
    return pd.DataFrame({
        "cell": np.arange(grid.n_cells),
        "x": grid.centroids[:, 0],
        "y": grid.centroids[:, 1],
        "mean": surfaces.mean(axis=0),
        "q025": np.quantile(surfaces, 0.025, axis=0),
        "q975": np.quantile(surfaces, 0.975, axis=0),
    })
