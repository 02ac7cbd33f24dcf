"""
Seeded simulation of latent Gaussian fields at grid centroids and their
evaluation at arbitrary locations through the nearest representative point
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utils.utils.exceptions import ValidationError
from utils.utils.seeding import SeedLike, make_rng

from .covariance import CovarianceFactor, ExpKernelParams, cov_matrix
from .domain_grid import GridApprox, Location, LocationsLike, nearest_centroid


@dataclass(frozen=True)
class GpField:
    """A latent field realized at the centroids of a grid"""
    grid: GridApprox
    values: np.ndarray
    params: ExpKernelParams

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise ValidationError(
                f"Field has {values.shape} values but the grid has {self.grid.n_cells} centroids"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, params: Optional[ExpKernelParams] = None) -> "GpField":
        return GpField(grid=self.grid, values=values, params=params or self.params)

    @classmethod
    def zeros(cls, grid: GridApprox, params: ExpKernelParams) -> "GpField":
        return cls(grid=grid, values=np.zeros(grid.n_cells), params=params)


def grid_factor(grid: GridApprox, params: ExpKernelParams) -> CovarianceFactor:
    """Covariance factor of a kernel over the grid centroids"""
    return cov_matrix(params, grid.centroids, distances=grid.distances)


def simulate_gp(grid: GridApprox, params: ExpKernelParams, seed: SeedLike) -> GpField:
    """One zero-mean field draw L z with z standard normal"""
    rng = make_rng(seed)
    factor = grid_factor(grid, params)
    z = rng.standard_normal(grid.n_cells)
    return GpField(grid=grid, values=factor.color(z), params=params)


def simulate_gp_batch(grid: GridApprox, params: ExpKernelParams, n: int, seed: SeedLike) -> np.ndarray:
    """n independent field draws as an (n, n_cells) array sharing one factorization"""
    rng = make_rng(seed)
    factor = grid_factor(grid, params)
    z = rng.standard_normal((grid.n_cells, int(n)))
    return (factor.chol @ z).T


def eval_field(gp_field: GpField, s: Location) -> float:
    """Field value at the centroid nearest to s"""
    return float(gp_field.values[nearest_centroid(gp_field.grid, s)])


def eval_field_at(gp_field: GpField, pts: LocationsLike) -> np.ndarray:
    """Vectorized eval_field"""
    return gp_field.values[gp_field.grid.nearest_centroids(pts)]
