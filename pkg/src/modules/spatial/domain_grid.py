"""
Study region, coordinate rescaling and the regular grid of representative points
used for stochastic integrals and latent field realization
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist, pdist

from utils.utils.exceptions import RegionError, ValidationError

# Slack for floating-point comparisons against region bounds
BOUNDS_TOL = 1e-12


@dataclass(frozen=True)
class Location:
    """A point in rescaled (unitless) coordinates"""
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


LocationsLike = Union[np.ndarray, Sequence[Location], Sequence[Tuple[float, float]]]


def as_points(pts: LocationsLike) -> np.ndarray:
    """Coerce locations to an (n, 2) float array"""
    if isinstance(pts, Location):
        return pts.as_array()[None, :]
    if isinstance(pts, np.ndarray):
        arr = np.asarray(pts, dtype=float)
    else:
        items = list(pts)
        if items and isinstance(items[0], Location):
            arr = np.array([[p.x, p.y] for p in items], dtype=float)
        else:
            arr = np.asarray(items, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    arr = np.atleast_2d(arr)
    if arr.shape[1] != 2:
        raise ValidationError(f"Locations must have two coordinates, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle; defaults to the unit square"""
    xmin: float = 0.0
    xmax: float = 1.0
    ymin: float = 0.0
    ymax: float = 1.0

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValidationError(
                f"Region must have positive area, got x=[{self.xmin}, {self.xmax}] y=[{self.ymin}, {self.ymax}]"
            )

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, pts: LocationsLike) -> np.ndarray:
        """Boolean mask of points inside the closed rectangle"""
        p = as_points(pts)
        return (
            (p[:, 0] >= self.xmin - BOUNDS_TOL) & (p[:, 0] <= self.xmax + BOUNDS_TOL)
            & (p[:, 1] >= self.ymin - BOUNDS_TOL) & (p[:, 1] <= self.ymax + BOUNDS_TOL)
        )

    def require_inside(self, pts: LocationsLike) -> np.ndarray:
        """Return the points as an array, raising RegionError if any lies outside"""
        p = as_points(pts)
        inside = self.contains(p)
        if not np.all(inside):
            bad = int(np.flatnonzero(~inside)[0])
            raise RegionError(
                f"Location ({p[bad, 0]:.6g}, {p[bad, 1]:.6g}) at index {bad} lies outside region {self.bounds}"
            )
        return p


@dataclass(frozen=True)
class GridApprox:
    """
    Regular grid of representative points over a region.

    Centroids are ordered row-major with x varying fastest:
    index = iy * nx + ix.
    """
    region: Region
    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) < 1 or int(self.ny) < 1:
            raise ValidationError(f"Grid resolution must be >= 1 per axis, got ({self.nx}, {self.ny})")

    @property
    def resolution(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return self.region.width / self.nx

    @property
    def dy(self) -> float:
        return self.region.height / self.ny

    @property
    def cell_area(self) -> float:
        return self.region.area / self.n_cells

    @cached_property
    def centroids(self) -> np.ndarray:
        xs = self.region.xmin + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.region.ymin + (np.arange(self.ny) + 0.5) * self.dy
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])

    @cached_property
    def distances(self) -> np.ndarray:
        """Pairwise centroid distances, computed once per grid"""
        return cdist(self.centroids, self.centroids)

    def centroid(self, index: int) -> Location:
        cx, cy = self.centroids[index]
        return Location(float(cx), float(cy))

    def cell_index(self, pts: LocationsLike) -> np.ndarray:
        """
        Cell membership: cells are closed-left/open-right, and points on the
        region's upper edges belong to the last cell.
        """
        p = self.region.require_inside(pts)
        ix = np.clip(np.floor((p[:, 0] - self.region.xmin) / self.dx), 0, self.nx - 1).astype(int)
        iy = np.clip(np.floor((p[:, 1] - self.region.ymin) / self.dy), 0, self.ny - 1).astype(int)
        return iy * self.nx + ix

    def nearest_centroids(self, pts: LocationsLike) -> np.ndarray:
        """
        Index of the nearest centroid for each point. Grid cells are the Voronoi
        cells of the centroids, so the nearest centroid is the containing cell's;
        a point on a shared edge takes the lower cell, which is the lowest index.
        """
        p = self.region.require_inside(pts)
        ux = (p[:, 0] - self.region.xmin) / self.dx
        uy = (p[:, 1] - self.region.ymin) / self.dy
        ix = np.clip(np.ceil(ux) - 1, 0, self.nx - 1).astype(int)
        iy = np.clip(np.ceil(uy) - 1, 0, self.ny - 1).astype(int)
        return iy * self.nx + ix


def build_grid(region: Region, resolution: Union[int, Tuple[int, int]]) -> GridApprox:
    """Build a resolution x resolution (or nx x ny) grid of cell centroids"""
    if isinstance(resolution, (tuple, list)):
        nx, ny = (int(r) for r in resolution)
    else:
        nx = ny = int(resolution)
    if nx < 1 or ny < 1:
        raise ValidationError(f"Grid resolution must be >= 1, got {resolution}")
    grid = GridApprox(region=region, nx=nx, ny=ny)
    logger.debug(f"Built {nx}x{ny} grid over {region.bounds}, cell area {grid.cell_area:.3e}")
    return grid


def nearest_centroid(grid: GridApprox, s: Union[Location, Tuple[float, float]]) -> int:
    """Nearest centroid index for a single location (ties go to the lowest index)"""
    return int(grid.nearest_centroids(as_points([s] if not isinstance(s, Location) else s))[0])


def rescale_coordinates(raw: Iterable[Tuple[float, float]]) -> Tuple[np.ndarray, Region, float]:
    """
    Divide raw (easting, northing) coordinates by their maximum pairwise distance.

    Returns the rescaled points, their bounding-box region and the scale factor
    (multiply rescaled coordinates by it to recover the originals).
    """
    p = as_points(list(raw) if not isinstance(raw, np.ndarray) else raw)
    if p.shape[0] < 2:
        raise ValidationError("Rescaling needs at least two points")
    if not np.all(np.isfinite(p)):
        raise ValidationError("Coordinates must be finite")

    scale = float(pdist(p).max())
    if scale <= 0.0:
        raise ValidationError("All points are identical; the coordinate scale is degenerate")

    scaled = p / scale
    lo = scaled.min(axis=0)
    hi = scaled.max(axis=0)
    # Collinear data still needs a region with positive area
    span = np.maximum(hi - lo, 0.0)
    pad = np.where(span > 0, 0.0, 0.5)
    region = Region(float(lo[0] - pad[0]), float(hi[0] + pad[0]), float(lo[1] - pad[1]), float(hi[1] + pad[1]))
    return scaled, region, scale
