"""Spatial building blocks: region/grid, kernels, latent fields, LGCP"""
from .domain_grid import GridApprox, Location, Region, build_grid, nearest_centroid, rescale_coordinates
from .covariance import (
    CoregCoef,
    CovarianceFactor,
    ExpKernelParams,
    PSCoef,
    cov_matrix,
    cross_cov_M4,
    cross_cov_components,
    exp_cov,
    local_cov_corr,
)
from .gp_sim import GpField, eval_field, eval_field_at, simulate_gp, simulate_gp_batch
from .lgcp import IntensityModel, PointPattern, lgcp_loglik, log_intensity, simulate_lgcp

__all__ = [
    "GridApprox",
    "Location",
    "Region",
    "build_grid",
    "nearest_centroid",
    "rescale_coordinates",
    "CoregCoef",
    "CovarianceFactor",
    "ExpKernelParams",
    "PSCoef",
    "cov_matrix",
    "cross_cov_M4",
    "cross_cov_components",
    "exp_cov",
    "local_cov_corr",
    "GpField",
    "eval_field",
    "eval_field_at",
    "simulate_gp",
    "simulate_gp_batch",
    "IntensityModel",
    "PointPattern",
    "lgcp_loglik",
    "log_intensity",
    "simulate_lgcp",
]
