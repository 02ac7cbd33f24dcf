"""
Log-Gaussian Cox process: intensity evaluation, grid-approximated
log-likelihood, and point pattern simulation by Poisson thinning
"""
from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy.special import logsumexp

from utils.utils.exceptions import LikelihoodError, ValidationError
from utils.utils.seeding import SeedLike, make_rng

from .covariates import CovariateProvider
from .domain_grid import GridApprox, Location, LocationsLike, Region, as_points
from .gp_sim import GpField, eval_field_at


@dataclass(frozen=True)
class IntensityModel:
    """log lambda(s) = X(s)^T alpha + eta(s)"""
    alpha: np.ndarray
    eta: GpField

    def __post_init__(self):
        alpha = np.atleast_1d(np.array(self.alpha, dtype=float))
        if np.any(np.isnan(alpha)):
            raise ValidationError("alpha must not contain NaN")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class PointPattern:
    """Ordered locations inside a region; order is the index identity for responses"""
    locations: np.ndarray
    region: Region

    def __post_init__(self):
        pts = self.region.require_inside(self.locations)
        object.__setattr__(self, "locations", pts)

    def __len__(self) -> int:
        return self.locations.shape[0]


def _design(covars: CovariateProvider, pts: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    try:
        x = np.asarray(covars(pts), dtype=float)
    except Exception as e:
        raise LikelihoodError(f"Covariate lookup failed: {e}", term="covariates") from e
    if x.shape != (pts.shape[0], alpha.shape[0]):
        raise ValidationError(
            f"Covariates have shape {x.shape}, expected ({pts.shape[0]}, {alpha.shape[0]}) to match alpha"
        )
    return x


def log_intensity_at(m: IntensityModel, covars: CovariateProvider, pts: LocationsLike) -> np.ndarray:
    """Vectorized log intensity X(s)^T alpha + eta(nearest centroid)"""
    p = m.eta.grid.region.require_inside(pts)
    x = _design(covars, p, m.alpha)
    return _linear(x, m.alpha) + eval_field_at(m.eta, p)


def log_intensity(m: IntensityModel, covars: CovariateProvider, s: Location) -> float:
    """log lambda at a single location"""
    return float(log_intensity_at(m, covars, as_points(s))[0])


def _linear(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    # -inf coefficients encode a zero intensity; avoid 0 * inf = nan
    if np.all(np.isfinite(alpha)):
        return x @ alpha
    terms = np.where(x == 0.0, 0.0, x * alpha)
    return terms.sum(axis=1)


def grid_log_intensity(m: IntensityModel, covars: CovariateProvider, grid: GridApprox) -> np.ndarray:
    """log lambda at every centroid"""
    x = _design(covars, grid.centroids, m.alpha)
    return _linear(x, m.alpha) + m.eta.values


def lgcp_loglik(m: IntensityModel, covars: CovariateProvider, pattern: PointPattern, grid: GridApprox) -> float:
    """
    sum_i log lambda(s_i) - sum_cells cell_area * lambda(centroid), with
    nearest-centroid eta at the observed points
    """
    log_lam_grid = grid_log_intensity(m, covars, grid)
    integral_log = logsumexp(log_lam_grid) + np.log(grid.cell_area)
    point_term = float(np.sum(log_intensity_at(m, covars, pattern.locations))) if len(pattern) else 0.0
    integral = float(np.exp(integral_log))
    value = point_term - integral
    if not np.isfinite(value):
        raise LikelihoodError(f"LGCP log-likelihood is not finite ({value})", term="lgcp")
    return value


def simulate_lgcp(m: IntensityModel, covars: CovariateProvider, grid: GridApprox, seed: SeedLike) -> PointPattern:
    """
    Lewis-Shedler thinning: a homogeneous Poisson(lambda_max * area) proposal,
    each point kept with probability lambda(cell) / lambda_max for the cell that
    contains it (GridApprox.cell_index). lambda_max is the maximum over
    centroids, so thinning is exact for the gridded intensity.
    """
    rng = make_rng(seed)
    region = grid.region
    log_lam = grid_log_intensity(m, covars, grid)
    if np.any(np.isnan(log_lam)) or np.any(log_lam == np.inf):
        raise LikelihoodError("Intensity is not finite on the grid", term="lgcp_simulation")

    log_max = float(np.max(log_lam))
    if log_max == -np.inf:
        return PointPattern(locations=np.zeros((0, 2)), region=region)

    lam_max = np.exp(log_max)
    if not np.isfinite(lam_max * region.area):
        raise LikelihoodError(f"Maximum intensity overflows (log {log_max:.2f})", term="lgcp_simulation")

    n_prop = rng.poisson(lam_max * region.area)
    props = np.column_stack([
        rng.uniform(region.xmin, region.xmax, n_prop),
        rng.uniform(region.ymin, region.ymax, n_prop),
    ])
    keep_prob = np.exp(log_lam[grid.cell_index(props)] - log_max) if n_prop else np.zeros(0)
    kept = props[rng.uniform(size=n_prop) < keep_prob]
    logger.debug(f"Thinning kept {kept.shape[0]} of {n_prop} proposals (lambda_max {lam_max:.1f})")
    return PointPattern(locations=kept, region=region)
