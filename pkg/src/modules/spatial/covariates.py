"""
Covariate providers X(s). A provider maps an (n, 2) array of locations to an
(n, p) design matrix; the LGCP integral evaluates it at grid centroids.
"""
from dataclasses import dataclass, field
from typing import List, Protocol, Sequence

import numpy as np
from scipy.spatial import cKDTree

from utils.utils.exceptions import ValidationError

from .domain_grid import LocationsLike, as_points


class CovariateProvider(Protocol):
    names: List[str]

    def __call__(self, pts: LocationsLike) -> np.ndarray:
        ...


@dataclass
class InterceptCovariates:
    """X(s) = 1"""
    names: List[str] = field(default_factory=lambda: ["intercept"])

    def __call__(self, pts: LocationsLike) -> np.ndarray:
        return np.ones((as_points(pts).shape[0], 1))


@dataclass
class CenteredCoordinateCovariates:
    """X(s) = (1, s_y - center); the simulation designs center at 0.5"""
    center: float = 0.5
    names: List[str] = field(default_factory=lambda: ["intercept", "s_y"])

    def __call__(self, pts: LocationsLike) -> np.ndarray:
        p = as_points(pts)
        return np.column_stack([np.ones(p.shape[0]), p[:, 1] - self.center])


class NearestSiteCovariates:
    """
    Covariates measured at observed sites, extended to any location by the
    nearest site (ties broken by the lowest site index). An intercept column is
    prepended.
    """

    def __init__(self, sites: np.ndarray, values: np.ndarray, names: Sequence[str]):
        sites = as_points(sites)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] != sites.shape[0]:
            raise ValidationError(
                f"Covariate table has {values.shape[0]} rows for {sites.shape[0]} sites"
            )
        if values.shape[1] != len(names):
            raise ValidationError(f"Expected {len(names)} covariate columns, got {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("Covariate values must be finite")
        self.sites = sites
        self.values = values
        self.names = ["intercept"] + list(names)
        self._tree = cKDTree(sites)

    def __call__(self, pts: LocationsLike) -> np.ndarray:
        p = as_points(pts)
        _, idx = self._tree.query(p, k=1)
        return np.column_stack([np.ones(p.shape[0]), self.values[np.asarray(idx, dtype=int)]])
