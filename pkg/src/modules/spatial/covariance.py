"""
Exponential covariance kernels, dense covariance assembly with Cholesky
factorization, and the closed-form cross-covariances of the shared-process
and coregionalization response models
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from loguru import logger
from scipy import linalg
from scipy.spatial.distance import cdist

from utils.utils.exceptions import CovarianceError, ValidationError

from .domain_grid import LocationsLike, as_points

ArrayLike = Union[float, np.ndarray]

# Jitter escalation: start at JITTER_START * sigma2, multiply by 10 up to JITTER_MAX * sigma2
JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class ExpKernelParams:
    """Exponential kernel sigma2 * exp(-phi * h)"""
    sigma2: float
    phi: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValidationError(f"sigma2 must be positive and finite, got {self.sigma2}")
        if not (np.isfinite(self.phi) and self.phi > 0):
            raise ValidationError(f"phi must be positive and finite, got {self.phi}")


@dataclass(frozen=True)
class CoregCoef:
    """Lower-triangular coregionalization loadings [[a11, 0], [a21, a22]]"""
    a11: float = 0.0
    a21: float = 0.0
    a22: float = 0.0

    def __post_init__(self):
        for name in ("a11", "a21", "a22"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.a11 < 0 or self.a22 < 0:
            raise ValidationError(f"Sign convention requires a11 >= 0 and a22 >= 0, got {self.a11}, {self.a22}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, 0.0], [self.a21, self.a22]])


@dataclass(frozen=True)
class PSCoef:
    """Preferential-sampling loadings of each response on the shared process"""
    gamma1: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.gamma1) and np.isfinite(self.gamma2)):
            raise ValidationError("gamma loadings must be finite")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.gamma1, self.gamma2])


@dataclass(frozen=True)
class CovarianceFactor:
    """Dense covariance matrix with its lower Cholesky factor"""
    matrix: np.ndarray
    chol: np.ndarray
    jitter: float

    @property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def whiten(self, values: np.ndarray) -> np.ndarray:
        """L^{-1} values"""
        return linalg.solve_triangular(self.chol, values, lower=True, check_finite=False)

    def color(self, z: np.ndarray) -> np.ndarray:
        """L z"""
        return self.chol @ z

    def log_density(self, values: np.ndarray) -> float:
        """Zero-mean Gaussian log density of values"""
        z = self.whiten(values)
        n = values.shape[0]
        return float(-0.5 * z @ z - 0.5 * self.log_det - 0.5 * n * np.log(2.0 * np.pi))


def exp_cov(params: ExpKernelParams, h: ArrayLike) -> ArrayLike:
    """sigma2 * exp(-phi * h) for distances h >= 0"""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise ValidationError("Distances must be non-negative")
    out = params.sigma2 * np.exp(-params.phi * h_arr)
    return float(out) if out.ndim == 0 else out


def factorize(matrix: np.ndarray, jitter: float, scale: float, escalate: bool = True) -> CovarianceFactor:
    """
    Cholesky-factorize matrix + jitter*I.

    With jitter > 0 and escalate set, failures retry with jitter multiplied by
    10 until JITTER_MAX * scale; jitter == 0 asks for an exact factorization.
    """
    n = matrix.shape[0]
    eye = np.eye(n)
    current = float(jitter)
    ceiling = JITTER_MAX * scale
    while True:
        try:
            chol = linalg.cholesky(matrix + current * eye, lower=True, check_finite=True)
            if current > jitter:
                logger.warning(f"Covariance factorization needed jitter {current:.1e} (requested {jitter:.1e})")
            return CovarianceFactor(matrix=matrix + current * eye, chol=chol, jitter=current)
        except (linalg.LinAlgError, ValueError) as e:
            if not escalate or current <= 0.0 or current * 10.0 > ceiling * (1 + 1e-12):
                raise CovarianceError(f"Cholesky factorization failed for {n}x{n} matrix: {e}", current) from e
            current *= 10.0


def cov_matrix(
    params: ExpKernelParams,
    pts: LocationsLike,
    jitter: Optional[float] = None,
    distances: Optional[np.ndarray] = None,
) -> CovarianceFactor:
    """
    Dense exponential covariance over pts plus jitter on the diagonal, factorized.

    Args:
        params: kernel parameters
        pts: locations (n >= 1)
        jitter: diagonal jitter; defaults to 1e-10 * sigma2. Zero disables escalation.
        distances: precomputed pairwise distances for pts (e.g. GridApprox.distances)
    """
    p = as_points(pts)
    if p.shape[0] == 0:
        raise ValidationError("cov_matrix needs at least one location")
    if jitter is None:
        jitter = JITTER_START * params.sigma2
    if jitter < 0:
        raise ValidationError(f"jitter must be >= 0, got {jitter}")
    d = cdist(p, p) if distances is None else distances
    sigma = params.sigma2 * np.exp(-params.phi * d)
    return factorize(sigma, jitter, params.sigma2)


def cross_cov_M4(
    ps: PSCoef,
    coreg: CoregCoef,
    eta_k: ExpKernelParams,
    w1_k: ExpKernelParams,
    w2_k: ExpKernelParams,
    h: ArrayLike,
) -> np.ndarray:
    """
    Cross-covariance of (Y1, Y2) at separation h without nuggets:
    c_eta(h) gamma gamma^T + c_w1(h) [a11, a21][a11, a21]^T + c_w2(h) diag(0, a22^2).

    gamma = 0 gives the coregionalized model, a = 0 the shared-process model.
    Returns a 2x2 matrix for scalar h, shape (len(h), 2, 2) otherwise.
    """
    parts = cross_cov_components(ps, coreg, eta_k, w1_k, w2_k, h)
    return parts["shared"] + parts["coreg"]


def cross_cov_components(
    ps: PSCoef,
    coreg: CoregCoef,
    eta_k: ExpKernelParams,
    w1_k: ExpKernelParams,
    w2_k: ExpKernelParams,
    h: ArrayLike,
) -> dict:
    """Shared-process and coregionalization parts of the cross-covariance, kept separate"""
    c_eta = np.asarray(exp_cov(eta_k, h))
    c_w1 = np.asarray(exp_cov(w1_k, h))
    c_w2 = np.asarray(exp_cov(w2_k, h))
    g = ps.vector
    a1 = np.array([coreg.a11, coreg.a21])
    shared_block = np.outer(g, g)
    w1_block = np.outer(a1, a1)
    w2_block = np.array([[0.0, 0.0], [0.0, coreg.a22 ** 2]])
    shared = c_eta[..., None, None] * shared_block
    corr = c_w1[..., None, None] * w1_block + c_w2[..., None, None] * w2_block
    return {"shared": shared, "coreg": corr}


def local_cov_corr(
    ps: PSCoef,
    coreg: CoregCoef,
    eta_sigma2: float,
    w1_sigma2: float,
    w2_sigma2: float,
    include_nugget: bool = False,
    tau1_2: float = 0.0,
    tau2_2: float = 0.0,
) -> Tuple[float, float]:
    """
    Covariance and correlation of (Y1(s), Y2(s)) at a single location.

    Marginal variances include the nuggets only when include_nugget is set.
    A zero marginal variance means no dependence, and the correlation is 0.
    """
    for name, value in (("eta_sigma2", eta_sigma2), ("w1_sigma2", w1_sigma2), ("w2_sigma2", w2_sigma2)):
        if not value > 0:
            raise ValidationError(f"{name} must be positive, got {value}")
    if include_nugget and (tau1_2 < 0 or tau2_2 < 0):
        raise ValidationError("Nugget variances must be non-negative")

    g1, g2 = ps.gamma1, ps.gamma2
    cov = g1 * g2 * eta_sigma2 + coreg.a11 * coreg.a21 * w1_sigma2
    var1 = g1 ** 2 * eta_sigma2 + coreg.a11 ** 2 * w1_sigma2
    var2 = g2 ** 2 * eta_sigma2 + coreg.a21 ** 2 * w1_sigma2 + coreg.a22 ** 2 * w2_sigma2
    if include_nugget:
        var1 += tau1_2
        var2 += tau2_2
    if var1 <= 0.0 or var2 <= 0.0:
        return float(cov), 0.0
    return float(cov), float(cov / np.sqrt(var1 * var2))
