"""
Joint hierarchical model: scenario (shared / overlapping / disjoint locations)
x response-model family, assembled into log-posterior evaluators over a single
parameter/latent state
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import linalg
from scipy.spatial.distance import cdist

from modules.spatial.covariance import CoregCoef, CovarianceFactor, ExpKernelParams, PSCoef, factorize
from modules.spatial.covariates import CovariateProvider
from modules.spatial.domain_grid import GridApprox, LocationsLike, Region, as_points
from modules.spatial.gp_sim import GpField, grid_factor
from modules.spatial.lgcp import PointPattern
from utils.utils.exceptions import ConfigurationError, LikelihoodError, ValidationError

from .priors import PriorSet, priors_default

LOG_2PI = np.log(2.0 * np.pi)


class Scenario(str, Enum):
    """How the two responses' sampling locations relate"""
    SHARED = "shared"
    OVERLAPPING = "overlapping"
    DISJOINT = "disjoint"


class ModelFamily(str, Enum):
    """Response-model families; the univariate ones use response 1 only"""
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"
    M1STAR = "M1star"
    M2STAR = "M2star"
    UNI_I = "uni_i"
    UNI_II = "uni_ii"
    UNI_III = "uni_iii"
    UNI_IV = "uni_iv"

    @property
    def has_shared_process(self) -> bool:
        return self in (ModelFamily.M2, ModelFamily.M4, ModelFamily.M2STAR, ModelFamily.UNI_II, ModelFamily.UNI_IV)

    @property
    def has_coreg(self) -> bool:
        return self in (
            ModelFamily.M3, ModelFamily.M4, ModelFamily.M1STAR, ModelFamily.M2STAR,
            ModelFamily.UNI_III, ModelFamily.UNI_IV,
        )

    @property
    def per_response_eta(self) -> bool:
        return self is ModelFamily.M2STAR

    @property
    def univariate(self) -> bool:
        return self.value.startswith("uni_")

    def allowed_in(self, scenario: "Scenario") -> bool:
        if scenario is Scenario.DISJOINT:
            return self in (ModelFamily.M1STAR, ModelFamily.M2STAR)
        return self not in (ModelFamily.M1STAR, ModelFamily.M2STAR)


@dataclass
class BivariateDataset:
    """
    Point-referenced bivariate data. Rows are sites; y holds NaN where a
    response is not observed and mask marks observed (site, response) pairs.
    Response j's sampling pattern is the set of sites with mask[:, j].
    """
    sites: np.ndarray
    y: np.ndarray
    mask: np.ndarray
    region: Region
    covariates: CovariateProvider
    response_covariates: Optional[CovariateProvider] = None
    site_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.sites = self.region.require_inside(self.sites)
        self.y = np.array(self.y, dtype=float).reshape(-1, 2)
        self.mask = np.array(self.mask, dtype=bool).reshape(-1, 2)
        n = self.sites.shape[0]
        if self.y.shape[0] != n or self.mask.shape[0] != n:
            raise ValidationError(f"y {self.y.shape} and mask {self.mask.shape} must have {n} rows")
        if np.any(self.mask & ~np.isfinite(self.y)):
            raise ValidationError("Observed responses must be finite")
        self.y = np.where(self.mask, self.y, np.nan)
        self.site_ids = np.arange(n) if self.site_ids is None else np.asarray(self.site_ids, dtype=int)

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    def pattern(self, j: int) -> PointPattern:
        return PointPattern(locations=self.sites[self.mask[:, j]], region=self.region)

    @property
    def pattern1(self) -> PointPattern:
        return self.pattern(0)

    @property
    def pattern2(self) -> PointPattern:
        return self.pattern(1)

    @property
    def y1(self) -> np.ndarray:
        return self.y[self.mask[:, 0], 0]

    @property
    def y2(self) -> np.ndarray:
        return self.y[self.mask[:, 1], 1]

    def is_shared(self) -> bool:
        return bool(np.all(self.mask))

    def subset(self, rows: Sequence[int], mask: Optional[np.ndarray] = None) -> "BivariateDataset":
        """Rows in the given order, optionally with a replacement mask for those rows"""
        rows = np.asarray(rows, dtype=int)
        new_mask = self.mask[rows] if mask is None else (np.asarray(mask, dtype=bool) & self.mask[rows])
        return BivariateDataset(
            sites=self.sites[rows],
            y=self.y[rows],
            mask=new_mask,
            region=self.region,
            covariates=self.covariates,
            response_covariates=self.response_covariates,
            site_ids=self.site_ids[rows],
        )

    def response_design(self, pts: Optional[LocationsLike] = None) -> np.ndarray:
        """Response regressors: X(s) followed by the optional response-only block V(s)"""
        p = self.sites if pts is None else as_points(pts)
        x = np.asarray(self.covariates(p), dtype=float)
        if self.response_covariates is not None:
            x = np.column_stack([x, np.asarray(self.response_covariates(p), dtype=float)])
        return x

    @classmethod
    def from_patterns(
        cls,
        pattern1: PointPattern,
        y1: np.ndarray,
        pattern2: PointPattern,
        y2: np.ndarray,
        covariates: CovariateProvider,
        shared: bool = False,
    ) -> "BivariateDataset":
        """Shared patterns become one row per site; otherwise rows are stacked pattern 1 then pattern 2"""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        if len(pattern1) != y1.shape[0] or len(pattern2) != y2.shape[0]:
            raise ValidationError("Response lengths must match their patterns")
        if shared:
            if not np.array_equal(pattern1.locations, pattern2.locations):
                raise ValidationError("Shared locations require identical patterns")
            return cls(
                sites=pattern1.locations,
                y=np.column_stack([y1, y2]),
                mask=np.ones((len(pattern1), 2), dtype=bool),
                region=pattern1.region,
                covariates=covariates,
            )
        n1, n2 = len(pattern1), len(pattern2)
        y = np.full((n1 + n2, 2), np.nan)
        y[:n1, 0] = y1
        y[n1:, 1] = y2
        mask = np.zeros((n1 + n2, 2), dtype=bool)
        mask[:n1, 0] = True
        mask[n1:, 1] = True
        return cls(
            sites=np.vstack([pattern1.locations, pattern2.locations]),
            y=y,
            mask=mask,
            region=pattern1.region,
            covariates=covariates,
        )


@dataclass
class ParamState:
    """
    Every parameter and latent field of the largest model. Parameters outside
    the active family sit at their null value (gamma = 0, a = 0, w = 0).
    w kernels have unit variance; the loadings carry the scale.
    """
    alpha: List[np.ndarray]
    beta: np.ndarray
    gamma: np.ndarray
    coreg: CoregCoef
    eta_kernels: List[ExpKernelParams]
    w_kernels: List[ExpKernelParams]
    tau2: np.ndarray
    eta: List[GpField]
    w: List[GpField]

    def __post_init__(self):
        self.tau2 = np.asarray(self.tau2, dtype=float)
        if np.any(~(self.tau2 > 0)):
            raise ValidationError(f"tau2 must be positive, got {self.tau2}")
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.alpha = [np.atleast_1d(np.asarray(a, dtype=float)) for a in self.alpha]

    @property
    def grid(self) -> GridApprox:
        return self.eta[0].grid

    @property
    def ps(self) -> PSCoef:
        return PSCoef(float(self.gamma[0]), float(self.gamma[1]))

    def copy(self) -> "ParamState":
        return ParamState(
            alpha=[a.copy() for a in self.alpha],
            beta=self.beta.copy(),
            gamma=self.gamma.copy(),
            coreg=self.coreg,
            eta_kernels=list(self.eta_kernels),
            w_kernels=list(self.w_kernels),
            tau2=self.tau2.copy(),
            eta=list(self.eta),
            w=list(self.w),
        )


class ModelContext:
    """
    Data-dependent quantities shared by every posterior evaluation of one
    (scenario, family, dataset, grid): nearest-centroid indices, designs,
    per-cell point counts for each LGCP.
    """

    def __init__(
        self,
        scenario: Scenario,
        family: ModelFamily,
        data: BivariateDataset,
        grid: GridApprox,
        priors: Optional[PriorSet] = None,
        fix_response_mean: bool = False,
        separable: bool = False,
    ):
        scenario = Scenario(scenario)
        family = ModelFamily(family)
        if not family.allowed_in(scenario):
            raise ConfigurationError(f"Model {family.value} is not defined for the {scenario.value} scenario")
        if scenario is Scenario.SHARED and not family.univariate and not data.is_shared():
            raise ConfigurationError("The shared scenario needs both responses observed at every site")

        self.scenario = scenario
        self.family = family
        self.data = data
        self.grid = grid
        self.priors = priors or priors_default()
        self.fix_response_mean = fix_response_mean
        self.separable = separable

        self.responses = [0] if family.univariate else [0, 1]
        mask = data.mask.copy()
        if family.univariate:
            mask[:, 1] = False
        self.mask = mask
        self.y = np.where(mask, data.y, 0.0)
        self.site_cells = grid.nearest_centroids(data.sites)
        self.obs_index = [np.flatnonzero(mask[:, j]) for j in range(2)]
        self.obs_cells = [self.site_cells[idx] for idx in self.obs_index]

        x_resp = data.response_design()
        self.x_resp = np.zeros((data.n_sites, 0)) if fix_response_mean else x_resp
        self.p_resp = self.x_resp.shape[1]

        self.x_grid = np.asarray(data.covariates(grid.centroids), dtype=float)
        self.p_int = self.x_grid.shape[1]
        x_sites = np.asarray(data.covariates(data.sites), dtype=float)

        # One LGCP on the union of locations, or one per pattern when disjoint
        if scenario is Scenario.DISJOINT:
            pattern_rows = [np.flatnonzero(data.mask[:, 0]), np.flatnonzero(data.mask[:, 1])]
        else:
            pattern_rows = [np.flatnonzero(data.mask.any(axis=1))]
        self.n_lgcp = len(pattern_rows)
        self.lgcp_rows = pattern_rows
        self.lgcp_counts = [np.bincount(self.site_cells[r], minlength=grid.n_cells).astype(float) for r in pattern_rows]
        self.lgcp_xsum = [x_sites[r].sum(axis=0) if r.size else np.zeros(self.p_int) for r in pattern_rows]
        self.lgcp_xpts = [x_sites[r] for r in pattern_rows]

        # Which eta field drives each response (None when not linked)
        if family.per_response_eta:
            self.eta_link: List[Optional[int]] = [0, 1]
        elif family.has_shared_process:
            self.eta_link = [0, 0]
        else:
            self.eta_link = [None, None]
        if family.univariate:
            self.eta_link[1] = None

        self.active_w = []
        if family.has_coreg:
            self.active_w.append(0)
            if not family.univariate and not separable:
                self.active_w.append(1)

        logger.debug(
            f"Model context {family.value}/{scenario.value}: n_sites={data.n_sites}, "
            f"n_obs={[len(i) for i in self.obs_index]}, n_lgcp={self.n_lgcp}, grid={grid.n_cells}"
        )

    # ---- parameter layout ----

    def param_names(self) -> List[str]:
        names = []
        for k in range(self.n_lgcp):
            names += [f"alpha{k + 1}_{i}" for i in range(self.p_int)]
        for j in self.responses:
            names += [f"beta{j + 1}_{i}" for i in range(self.p_resp)]
        if self.family.has_shared_process:
            names += [f"gamma{j + 1}" for j in self.responses]
        if 0 in self.active_w:
            names.append("a11")
            if not self.family.univariate:
                names.append("a21")
        if 1 in self.active_w:
            names.append("a22")
        for k in range(self.n_lgcp):
            names += [f"sigma2_eta{k + 1}", f"phi_eta{k + 1}"]
        names += [f"phi_w{i + 1}" for i in self.active_w]
        names += [f"tau2_{j + 1}" for j in self.responses]
        return names

    def field_names(self) -> List[str]:
        return [f"eta{k + 1}" for k in range(self.n_lgcp)] + [f"w{i + 1}" for i in self.active_w]

    def state_to_dict(self, state: ParamState) -> Dict[str, float]:
        values: Dict[str, float] = {}
        for k in range(self.n_lgcp):
            for i in range(self.p_int):
                values[f"alpha{k + 1}_{i}"] = float(state.alpha[k][i])
        for j in self.responses:
            for i in range(self.p_resp):
                values[f"beta{j + 1}_{i}"] = float(state.beta[j, i])
            values[f"gamma{j + 1}"] = float(state.gamma[j])
            values[f"tau2_{j + 1}"] = float(state.tau2[j])
        values["a11"], values["a21"], values["a22"] = state.coreg.a11, state.coreg.a21, state.coreg.a22
        for k in range(self.n_lgcp):
            values[f"sigma2_eta{k + 1}"] = state.eta_kernels[k].sigma2
            values[f"phi_eta{k + 1}"] = state.eta_kernels[k].phi
        for i in range(2):
            values[f"phi_w{i + 1}"] = state.w_kernels[i].phi
        return {name: values[name] for name in self.param_names()}

    def state_from_dict(self, values: Mapping[str, float], fields: Optional[Mapping[str, np.ndarray]] = None) -> ParamState:
        """Rebuild a state from named scalars and field values; missing names take null/initial values"""
        base = self.initial_state()
        get = lambda name, default: float(values.get(name, default))  # noqa: E731
        alpha = [np.array([get(f"alpha{k + 1}_{i}", base.alpha[k][i]) for i in range(self.p_int)]) for k in range(self.n_lgcp)]
        beta = np.zeros((2, self.p_resp))
        gamma = np.zeros(2)
        tau2 = base.tau2.copy()
        for j in self.responses:
            beta[j] = [get(f"beta{j + 1}_{i}", 0.0) for i in range(self.p_resp)]
            gamma[j] = get(f"gamma{j + 1}", 0.0) if self.family.has_shared_process else 0.0
            tau2[j] = get(f"tau2_{j + 1}", tau2[j])
        coreg = CoregCoef(
            a11=get("a11", 0.0) if 0 in self.active_w else 0.0,
            a21=get("a21", 0.0) if (0 in self.active_w and not self.family.univariate) else 0.0,
            a22=get("a22", 0.0) if 1 in self.active_w else 0.0,
        )
        eta_kernels = [
            ExpKernelParams(get(f"sigma2_eta{k + 1}", base.eta_kernels[k].sigma2), get(f"phi_eta{k + 1}", base.eta_kernels[k].phi))
            for k in range(self.n_lgcp)
        ]
        w_kernels = [ExpKernelParams(1.0, get(f"phi_w{i + 1}", base.w_kernels[i].phi)) for i in range(2)]
        fields = fields or {}
        eta = [
            GpField(self.grid, np.asarray(fields.get(f"eta{k + 1}", np.zeros(self.grid.n_cells))), eta_kernels[k])
            for k in range(self.n_lgcp)
        ]
        w = [
            GpField(self.grid, np.asarray(fields.get(f"w{i + 1}", np.zeros(self.grid.n_cells))), w_kernels[i])
            for i in range(2)
        ]
        return ParamState(alpha, beta, gamma, coreg, eta_kernels, w_kernels, tau2, eta, w)

    def initial_state(self) -> ParamState:
        """
        beta, gamma at 0; tau2 and sigma2 at their prior means; phi at 3; fields
        at 0; the LGCP intercept at log(n / area), other alpha at 0; a11 = a22 = 1.
        """
        grid = self.grid
        sigma2_init = _prior_center(self.priors.sigma2, 1.0)
        tau2_init = _prior_center(self.priors.tau2, 0.1)
        eta_kernels = [ExpKernelParams(sigma2_init, 3.0) for _ in range(self.n_lgcp)]
        w_kernels = [ExpKernelParams(1.0, 3.0), ExpKernelParams(1.0, 3.0)]
        alpha = []
        for k in range(self.n_lgcp):
            a = np.zeros(self.p_int)
            n_k = self.lgcp_rows[k].size
            if self.p_int:
                a[0] = np.log(max(n_k, 1) / grid.region.area)
            alpha.append(a)
        coreg = CoregCoef(
            a11=1.0 if 0 in self.active_w else 0.0,
            a21=0.0,
            a22=1.0 if 1 in self.active_w else 0.0,
        )
        return ParamState(
            alpha=alpha,
            beta=np.zeros((2, self.p_resp)),
            gamma=np.zeros(2),
            coreg=coreg,
            eta_kernels=eta_kernels,
            w_kernels=w_kernels,
            tau2=np.full(2, tau2_init),
            eta=[GpField.zeros(grid, kern) for kern in eta_kernels],
            w=[GpField.zeros(grid, kern) for kern in w_kernels],
        )

    # ---- likelihood pieces ----

    def lgcp_term(self, state: ParamState, k: int, eta_values: Optional[np.ndarray] = None,
                  alpha: Optional[np.ndarray] = None) -> float:
        """Grid-approximated LGCP log-likelihood of pattern k"""
        eta_values = state.eta[k].values if eta_values is None else eta_values
        alpha = state.alpha[k] if alpha is None else alpha
        log_lam = self.x_grid @ alpha + eta_values
        with np.errstate(over="ignore"):
            integral = self.grid.cell_area * float(np.sum(np.exp(log_lam)))
        value = float(self.lgcp_xsum[k] @ alpha + self.lgcp_counts[k] @ eta_values) - integral
        return value if np.isfinite(value) else -np.inf

    def loading(self, state: ParamState, j: int) -> Dict[str, float]:
        """Coefficient of each latent field in response j's mean"""
        loads: Dict[str, float] = {}
        link = self.eta_link[j]
        if link is not None:
            loads[f"eta{link + 1}"] = float(state.gamma[j])
        if 0 in self.active_w:
            loads["w1"] = state.coreg.a11 if j == 0 else state.coreg.a21
        if 1 in self.active_w and j == 1:
            loads["w2"] = state.coreg.a22
        return loads

    def field_values(self, state: ParamState, name: str) -> np.ndarray:
        kind, idx = name[:-1], int(name[-1]) - 1
        return state.eta[idx].values if kind == "eta" else state.w[idx].values

    def response_mean(self, state: ParamState, j: int, exclude: Optional[str] = None) -> np.ndarray:
        """Mean of response j at its observed sites, optionally leaving one latent field out"""
        rows, cells = self.obs_index[j], self.obs_cells[j]
        mu = self.x_resp[rows] @ state.beta[j] if self.p_resp else np.zeros(rows.size)
        for name, load in self.loading(state, j).items():
            if name != exclude and load != 0.0:
                mu = mu + load * self.field_values(state, name)[cells]
        return mu

    def response_loglik(self, state: ParamState) -> float:
        total = 0.0
        for j in self.responses:
            if not state.tau2[j] > 0:
                raise ValidationError(f"tau2_{j + 1} must be positive")
            resid = self.y[self.obs_index[j], j] - self.response_mean(state, j)
            n = resid.size
            total += -0.5 * n * (LOG_2PI + np.log(state.tau2[j])) - 0.5 * float(resid @ resid) / state.tau2[j]
        return float(total)

    def active_fields(self, state: ParamState) -> List[Tuple[str, GpField]]:
        out = [(f"eta{k + 1}", state.eta[k]) for k in range(self.n_lgcp)]
        out += [(f"w{i + 1}", state.w[i]) for i in self.active_w]
        return out

    def latent_log_prior(self, state: ParamState, factors: Optional[Mapping[str, CovarianceFactor]] = None) -> float:
        total = 0.0
        for name, gp in self.active_fields(state):
            factor = factors[name] if factors and name in factors else grid_factor(self.grid, gp.params)
            total += factor.log_density(gp.values)
        return total

    def param_log_prior(self, state: ParamState) -> float:
        pr = self.priors
        total = 0.0
        for k in range(self.n_lgcp):
            total += pr.alpha.logpdf(state.alpha[k])
            total += pr.sigma2.logpdf(state.eta_kernels[k].sigma2) + pr.phi.logpdf(state.eta_kernels[k].phi)
        for j in self.responses:
            if self.p_resp:
                total += pr.beta.logpdf(state.beta[j])
            if self.family.has_shared_process:
                total += pr.gamma.logpdf(state.gamma[j])
            total += pr.tau2.logpdf(state.tau2[j])
        if 0 in self.active_w:
            total += pr.coreg.logpdf(state.coreg.a11) + pr.phi_w.logpdf(state.w_kernels[0].phi)
            if not self.family.univariate:
                total += pr.coreg.logpdf(state.coreg.a21)
        if 1 in self.active_w:
            total += pr.coreg.logpdf(state.coreg.a22) + pr.phi_w.logpdf(state.w_kernels[1].phi)
        return float(total)

    def log_posterior_terms(self, state: ParamState) -> Dict[str, float]:
        terms = {f"lgcp{k + 1}": self.lgcp_term(state, k) for k in range(self.n_lgcp)}
        terms["response"] = self.response_loglik(state)
        terms["latent_prior"] = self.latent_log_prior(state)
        terms["param_prior"] = self.param_log_prior(state)
        return terms

    def log_posterior(self, state: ParamState) -> float:
        return float(sum(self.log_posterior_terms(state).values()))


def _prior_center(prior, fallback: float) -> float:
    mean = getattr(prior, "mean", fallback)
    return float(mean) if np.isfinite(mean) and mean > 0 else fallback


def response_loglik(family: ModelFamily, state: ParamState, data: BivariateDataset,
                    scenario: Optional[Scenario] = None) -> float:
    """
    Gaussian log-likelihood of all observed (site, response) pairs given the
    latent fields; masked pairs contribute nothing.
    """
    family = ModelFamily(family)
    if scenario is None:
        if family in (ModelFamily.M1STAR, ModelFamily.M2STAR):
            scenario = Scenario.DISJOINT
        else:
            scenario = Scenario.SHARED if data.is_shared() else Scenario.OVERLAPPING
    if np.any(~(np.asarray(state.tau2) > 0)):
        raise ValidationError("tau2 must be positive")
    fix_mean = state.beta.shape[1] == 0
    ctx = ModelContext(scenario, family, data, state.grid, fix_response_mean=fix_mean)
    return ctx.response_loglik(state)


def joint_log_posterior(
    scenario: Scenario,
    family: ModelFamily,
    state: ParamState,
    data: BivariateDataset,
    grid: GridApprox,
    priors: Optional[PriorSet] = None,
) -> float:
    """
    LGCP term(s) + response log-likelihood + latent GP log densities + prior
    log densities
    """
    ctx = ModelContext(scenario, family, data, grid, priors, fix_response_mean=state.beta.shape[1] == 0)
    terms = ctx.log_posterior_terms(state)
    bad = [name for name, value in terms.items() if not np.isfinite(value)]
    if bad:
        raise LikelihoodError(f"Posterior term is not finite: {terms[bad[0]]}", term=bad[0])
    return float(sum(terms.values()))


def _latent_blocks(ctx: ModelContext, state: ParamState, rows_cells: List[Tuple[int, np.ndarray]]):
    """For each active latent field: (kernel, per-row loading vector, row cells)"""
    blocks = []
    for name, gp in ctx.active_fields(state):
        loads = np.concatenate([
            np.full(cells.size, ctx.loading(state, j).get(name, 0.0)) for j, cells in rows_cells
        ])
        if np.any(loads != 0.0):
            blocks.append((gp.params, loads))
    return blocks


def marginal_covariance(ctx: ModelContext, state: ParamState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Mean vector, covariance and observed values of the stacked observations
    (response 1 rows, then response 2 rows) with the latent fields integrated out.
    """
    rows_cells = [(j, ctx.obs_cells[j]) for j in ctx.responses]
    cells = np.concatenate([c for _, c in rows_cells])
    d = ctx.grid.distances[np.ix_(cells, cells)]
    cov = np.diag(np.concatenate([np.full(c.size, state.tau2[j]) for j, c in rows_cells]))
    for kernel, loads in _latent_blocks(ctx, state, rows_cells):
        cov = cov + np.outer(loads, loads) * (kernel.sigma2 * np.exp(-kernel.phi * d))
    mean = np.concatenate([
        ctx.x_resp[ctx.obs_index[j]] @ state.beta[j] if ctx.p_resp else np.zeros(ctx.obs_index[j].size)
        for j in ctx.responses
    ])
    y = np.concatenate([ctx.y[ctx.obs_index[j], j] for j in ctx.responses])
    return mean, cov, y


def marginal_response_loglik(ctx: ModelContext, state: ParamState) -> float:
    """Response log-likelihood with every latent field marginalized (dense MVN)"""
    mean, cov, y = marginal_covariance(ctx, state)
    factor = factorize(cov, 0.0, 1.0, escalate=False)
    z = factor.whiten(y - mean)
    return float(-0.5 * z @ z - 0.5 * factor.log_det - 0.5 * y.size * LOG_2PI)


def cokrige(ctx: ModelContext, state: ParamState, sites: LocationsLike) -> Dict[str, np.ndarray]:
    """
    Co-kriging with parameters held fixed: conditional mean and variance of
    (Y1, Y2) at new sites given every observed response, latent fields
    marginalized. Observation sites sit at their nearest centroids; new sites
    use their exact coordinates.
    """
    s0 = ctx.grid.region.require_inside(sites)
    rows_cells = [(j, ctx.obs_cells[j]) for j in ctx.responses]
    cells = np.concatenate([c for _, c in rows_cells])
    mean_obs, cov, y = marginal_covariance(ctx, state)
    factor = factorize(cov, 0.0, 1.0, escalate=False)
    resid_w = linalg.cho_solve((factor.chol, True), y - mean_obs)

    d0 = cdist(s0, ctx.grid.centroids[cells])
    x0 = ctx.data.response_design(s0) if ctx.p_resp else np.zeros((s0.shape[0], 0))

    means = np.full((s0.shape[0], 2), np.nan)
    variances = np.full((s0.shape[0], 2), np.nan)
    for j in ctx.responses:
        cross = np.zeros((s0.shape[0], cells.size))
        prior_var = float(state.tau2[j])
        loads_j = ctx.loading(state, j)
        for name, gp in ctx.active_fields(state):
            lj = loads_j.get(name, 0.0)
            if lj == 0.0:
                continue
            loads = np.concatenate([
                np.full(c.size, ctx.loading(state, jj).get(name, 0.0)) for jj, c in rows_cells
            ])
            k0 = gp.params.sigma2 * np.exp(-gp.params.phi * d0)
            cross += lj * k0 * loads[None, :]
            prior_var += lj ** 2 * gp.params.sigma2
        mu0 = x0 @ state.beta[j] if ctx.p_resp else np.zeros(s0.shape[0])
        means[:, j] = mu0 + cross @ resid_w
        v = factor.whiten(cross.T)
        variances[:, j] = np.maximum(prior_var - np.sum(v * v, axis=0), 0.0)
    return {"mean": means, "var": variances}
