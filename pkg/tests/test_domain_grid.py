import numpy as np
import pytest

from modules.spatial.domain_grid import GridApprox, Location, Region, build_grid, nearest_centroid, rescale_coordinates
from utils.utils.exceptions import RegionError, ValidationError


def test_resolution_30_has_900_cells(unit_region):
    grid = build_grid(unit_region, 30)
    assert grid.n_cells == 900
    assert grid.centroids.shape == (900, 2)
    assert grid.cell_area == pytest.approx(1.0 / 900)


def test_single_cell_grid(unit_region):
    grid = build_grid(unit_region, 1)
    np.testing.assert_allclose(grid.centroids, [[0.5, 0.5]])
    assert grid.cell_area == pytest.approx(1.0)


def test_resolution_2_centroids_row_major(unit_region):
    grid = build_grid(unit_region, 2)
    np.testing.assert_allclose(grid.centroids, [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])


def test_rectangular_resolution():
    grid = build_grid(Region(0.0, 2.0, 0.0, 1.0), (4, 2))
    assert grid.n_cells == 8
    assert grid.dx == pytest.approx(0.5)
    assert grid.dy == pytest.approx(0.5)
    assert grid.cell_area == pytest.approx(0.25)


@pytest.mark.parametrize("resolution", [0, -3])
def test_bad_resolution_rejected(unit_region, resolution):
    with pytest.raises(ValidationError):
        build_grid(unit_region, resolution)


def test_region_needs_positive_area():
    with pytest.raises(ValidationError):
        Region(0.0, 0.0, 0.0, 1.0)


@pytest.mark.parametrize(
    "point, expected",
    [
        ((0.1, 0.1), 0),
        ((0.5, 0.5), 0),
        ((0.9, 0.1), 1),
        ((0.1, 0.9), 2),
        ((0.75, 0.75), 3),
    ],
)
def test_nearest_centroid_resolution_2(unit_region, point, expected):
    grid = build_grid(unit_region, 2)
    assert nearest_centroid(grid, point) == expected


def test_nearest_centroid_fixed_point_at_centroids(unit_region):
    grid = build_grid(unit_region, 30)
    np.testing.assert_array_equal(grid.nearest_centroids(grid.centroids), np.arange(900))


def test_nearest_centroid_matches_brute_force(unit_region, rng):
    grid = build_grid(unit_region, 7)
    pts = rng.uniform(size=(200, 2))
    d = np.linalg.norm(pts[:, None, :] - grid.centroids[None, :, :], axis=2)
    np.testing.assert_array_equal(grid.nearest_centroids(pts), np.argmin(d, axis=1))


def test_nearest_centroid_accepts_location(unit_region):
    grid = build_grid(unit_region, 2)
    assert nearest_centroid(grid, Location(0.8, 0.8)) == 3


def test_outside_location_raises(unit_region):
    grid = build_grid(unit_region, 2)
    with pytest.raises(RegionError):
        grid.nearest_centroids(np.array([[1.5, 0.5]]))


def test_upper_edge_belongs_to_last_cell(unit_region):
    grid = build_grid(unit_region, 3)
    assert grid.cell_index(np.array([[1.0, 1.0]]))[0] == 8


def test_membership_and_nearest_centroid_split_edges_differently(unit_region, rng):
    grid = build_grid(unit_region, 3)
    pts = rng.uniform(size=(200, 2))
    np.testing.assert_array_equal(grid.cell_index(pts), grid.nearest_centroids(pts))
    edge = np.array([[1.0 / 3.0, 0.5]])
    assert grid.cell_index(edge)[0] == 4
    assert grid.nearest_centroids(edge)[0] == 3


def test_rescale_vertical_pair():
    scaled, region, scale = rescale_coordinates([(0.0, 0.0), (0.0, 2.0)])
    np.testing.assert_allclose(scaled, [[0.0, 0.0], [0.0, 1.0]])
    assert scale == pytest.approx(2.0)
    assert region.area > 0


def test_rescale_345_triangle():
    scaled, _, scale = rescale_coordinates([(0.0, 0.0), (3.0, 4.0)])
    assert scale == pytest.approx(5.0)
    assert np.linalg.norm(scaled[1] - scaled[0]) == pytest.approx(1.0)


def test_rescale_unit_input_is_identity():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.2]])
    scaled, region, scale = rescale_coordinates(pts)
    assert scale == pytest.approx(1.0)
    np.testing.assert_allclose(scaled, pts)
    assert region.contains(scaled).all()


@pytest.mark.parametrize("pts", [[(1.0, 1.0)], [(1.0, 1.0), (1.0, 1.0)]])
def test_rescale_degenerate_input(pts):
    with pytest.raises(ValidationError):
        rescale_coordinates(pts)


def test_grid_distances_cached(unit_region):
    grid = GridApprox(unit_region, 3, 3)
    assert grid.distances is grid.distances
    assert grid.distances.shape == (9, 9)
