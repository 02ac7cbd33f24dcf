"""
Posterior sampling for the joint model.

One sweep updates, in order: each LGCP field by elliptical slice sampling, its
kernel hyperparameters by a whitened Metropolis move (plus a conjugate refresh
of the variance), the LGCP regression coefficients by preconditioned random
walk, the coregionalization fields and their decay rates, the linear response
coefficients by exact Gibbs draws, and the nugget variances.
"""
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy import linalg
from scipy.special import expit, logit
from tqdm import tqdm

from modules.spatial.covariance import CoregCoef, CovarianceFactor, ExpKernelParams
from modules.spatial.domain_grid import GridApprox, Region, build_grid
from modules.spatial.gp_sim import GpField, grid_factor
from utils.utils.alerting import ConvergenceAlertManager
from utils.utils.exceptions import LikelihoodError, SamplerError, ValidationError
from utils.utils.performance_monitor import get_performance_monitor
from utils.utils.seeding import SeedLike, make_rng

from .diagnostics import ess_report
from .model import BivariateDataset, ModelContext, ModelFamily, ParamState, Scenario
from .priors import InverseGammaPrior, Prior, PriorSet

MAX_SHRINKS = 200


@dataclass
class McmcConfig:
    """Chain lengths, proposal scales and adaptation settings"""
    n_burn: int = 10000
    n_keep: int = 20000
    thin: int = 1
    field_thin: int = 10
    seed: SeedLike = None
    step_log_sigma2: float = 0.3
    step_logit_phi: float = 0.3
    step_alpha: float = 0.1
    target_ess: float = 200.0
    adapt: bool = True
    target_accept: float = 0.3
    conjugate_variance: bool = True
    sample_gamma: bool = True
    progress: bool = False

    def __post_init__(self):
        if self.n_burn < 0 or self.n_keep < 0:
            raise ValidationError("n_burn and n_keep must be non-negative")
        if self.thin < 1 or self.field_thin < 1:
            raise ValidationError("thin and field_thin must be at least 1")
        for name in ("step_log_sigma2", "step_logit_phi", "step_alpha"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    @property
    def n_draws(self) -> int:
        return self.n_keep // self.thin


@dataclass
class PosteriorDraws:
    """
    Kept draws of one chain. traces maps parameter names to (n_draws,) arrays;
    fields maps latent field names to (n_snapshots, n_cells) arrays recorded at
    the draw positions in field_draw_index.
    """
    family: str
    scenario: str
    traces: Dict[str, np.ndarray]
    fields: Dict[str, np.ndarray]
    field_draw_index: np.ndarray
    acceptance: Dict[str, float] = field(default_factory=dict)
    ess: Dict[str, float] = field(default_factory=dict)
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return len(next(iter(self.traces.values()))) if self.traces else 0

    @property
    def param_names(self) -> List[str]:
        return list(self.traces)

    @property
    def grid(self) -> GridApprox:
        g = self.meta["grid"]
        region = Region(g["xmin"], g["xmax"], g["ymin"], g["ymax"])
        return GridApprox(region, int(g["nx"]), int(g["ny"]))

    def derived_traces(self) -> Dict[str, np.ndarray]:
        """Products of variance and decay that the data identify better than either factor"""
        out = {}
        for name in self.traces:
            if name.startswith("sigma2_eta"):
                k = name[len("sigma2_eta"):]
                out[f"sigma2_phi_eta{k}"] = self.traces[name] * self.traces[f"phi_eta{k}"]
        if "a11" in self.traces and "phi_w1" in self.traces:
            out["a11sq_phi_w1"] = self.traces["a11"] ** 2 * self.traces["phi_w1"]
        if "a22" in self.traces and "phi_w2" in self.traces:
            out["a22sq_phi_w2"] = self.traces["a22"] ** 2 * self.traces["phi_w2"]
        return out

    def summary(self) -> pd.DataFrame:
        rows = []
        derived = self.derived_traces()
        derived_ess = ess_report(derived)
        for name, values in {**self.traces, **derived}.items():
            rows.append({
                "parameter": name,
                "mean": float(np.mean(values)),
                "sd": float(np.std(values, ddof=1)) if values.size > 1 else float("nan"),
                "q025": float(np.quantile(values, 0.025)),
                "q975": float(np.quantile(values, 0.975)),
                "ess": float(self.ess.get(name, derived_ess.get(name, float("nan")))),
            })
        return pd.DataFrame(rows, columns=["parameter", "mean", "sd", "q025", "q975", "ess"])

    def trace_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.traces)
        frame.insert(0, "draw", np.arange(self.n_draws))
        return frame

    def to_csv(self, path: Union[str, Path]):
        """One column per scalar parameter; field snapshots go to sibling files"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.trace_frame().to_csv(path, index=False, float_format="%.10g")
        for name, values in self.fields.items():
            frame = pd.DataFrame(values, columns=[f"cell{i}" for i in range(values.shape[1])])
            frame.insert(0, "draw", self.field_draw_index)
            frame.to_csv(path.with_name(f"{path.stem}_{name}.csv"), index=False, float_format="%.10g")

    def save(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {f"trace__{k}": v for k, v in self.traces.items()}
        arrays.update({f"field__{k}": v for k, v in self.fields.items()})
        header = {
            "family": self.family,
            "scenario": self.scenario,
            "acceptance": self.acceptance,
            "ess": {k: (None if not np.isfinite(v) else v) for k, v in self.ess.items()},
            "meta": self.meta,
            "order": list(self.traces),
        }
        np.savez_compressed(path, field_draw_index=self.field_draw_index, header=np.array(json.dumps(header)), **arrays)
        logger.debug(f"Saved {self.n_draws} posterior draws to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PosteriorDraws":
        with np.load(Path(path), allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            traces = {k: data[f"trace__{k}"] for k in header["order"]}
            fields = {k[len("field__"):]: data[k] for k in data.files if k.startswith("field__")}
            index = data["field_draw_index"]
        ess = {k: (float("nan") if v is None else float(v)) for k, v in header["ess"].items()}
        return cls(header["family"], header["scenario"], traces, fields, index, header["acceptance"], ess, header["meta"])

    def snapshot_states(self, ctx: ModelContext, max_draws: Optional[int] = None) -> Iterator[Tuple[int, ParamState]]:
        """(draw index, state) for each draw that carries a field snapshot"""
        n_snap = self.field_draw_index.size
        picks = np.arange(n_snap)
        if max_draws is not None and n_snap > max_draws:
            picks = np.unique(np.linspace(0, n_snap - 1, int(max_draws)).round().astype(int))
        for s in picks:
            i = int(self.field_draw_index[s])
            values = {name: float(trace[i]) for name, trace in self.traces.items()}
            fields = {name: snap[s] for name, snap in self.fields.items()}
            yield i, ctx.state_from_dict(values, fields)


@dataclass
class HyperUpdate:
    params: ExpKernelParams
    field: GpField
    accepted: bool
    loglik: float
    factor: CovarianceFactor


def _chol_of(prior_chol) -> np.ndarray:
    return prior_chol.chol if isinstance(prior_chol, CovarianceFactor) else np.asarray(prior_chol)


def elliptical_slice(
    current: np.ndarray,
    nu: np.ndarray,
    loglik: Callable[[np.ndarray], float],
    cur_loglik: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, float]:
    """One slice move on the ellipse through current and the prior draw nu"""
    threshold = math.log(rng.uniform()) + cur_loglik
    theta = rng.uniform(0.0, 2.0 * math.pi)
    lo, hi = theta - 2.0 * math.pi, theta
    for _ in range(MAX_SHRINKS):
        proposal = current * math.cos(theta) + nu * math.sin(theta)
        value = loglik(proposal)
        if np.isfinite(value) and value > threshold:
            return proposal, float(value)
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        theta = rng.uniform(lo, hi)
    logger.debug("Elliptical slice bracket collapsed; keeping the current state")
    return current, cur_loglik


def ess_update_field(
    gp_field: GpField,
    loglik: Callable[[np.ndarray], float],
    prior_chol,
    seed: SeedLike,
    cur_loglik: Optional[float] = None,
) -> GpField:
    """Elliptical slice move for a field with a zero-mean Gaussian prior"""
    rng = make_rng(seed)
    values, _ = _ess_step(gp_field.values, loglik, _chol_of(prior_chol), rng, cur_loglik)
    return gp_field.with_values(values)


def _ess_step(values, loglik, chol, rng, cur_loglik=None):
    current = np.asarray(values, dtype=float)
    if cur_loglik is None:
        cur_loglik = loglik(current)
    if not np.isfinite(cur_loglik):
        raise SamplerError("Elliptical slice sampling needs a finite log-likelihood at the current field")
    nu = chol @ rng.standard_normal(current.shape[0])
    return elliptical_slice(current, nu, loglik, cur_loglik, rng)


def _phi_transform(prior: Prior):
    """Unconstrained map for a decay rate: logit over a bounded support, log otherwise"""
    lo, hi = prior.support
    lo = max(lo, 0.0)
    if np.isfinite(hi):
        width = hi - lo
        to_u = lambda phi: float(logit((phi - lo) / width))  # noqa: E731
        from_u = lambda u: float(lo + width * expit(u))  # noqa: E731
        log_jac = lambda phi: math.log(phi - lo) + math.log(hi - phi) - math.log(width)  # noqa: E731
    else:
        to_u = lambda phi: math.log(phi)  # noqa: E731
        from_u = lambda u: math.exp(u)  # noqa: E731
        log_jac = lambda phi: math.log(phi)  # noqa: E731
    return to_u, from_u, log_jac


def update_hyperparams(
    params: ExpKernelParams,
    gp_field: GpField,
    loglik: Callable[[np.ndarray], float],
    priors: Tuple[Prior, Prior],
    step: Tuple[float, float],
    seed: SeedLike,
    fix_variance: bool = False,
    cur_loglik: Optional[float] = None,
    factor: Optional[CovarianceFactor] = None,
) -> HyperUpdate:
    """
    Whitened move: hold z = L^{-1} field fixed, random-walk (log sigma2, logit phi),
    recolor field = L_new z and accept on likelihood + hyperprior + Jacobian.
    priors is (sigma2 prior, phi prior).
    """
    rng = make_rng(seed)
    grid = gp_field.grid
    factor = factor or grid_factor(grid, params)
    if cur_loglik is None:
        cur_loglik = loglik(gp_field.values)
    s_sigma, s_phi = step
    if (s_sigma == 0.0 or fix_variance) and s_phi == 0.0:
        return HyperUpdate(params, gp_field, False, cur_loglik, factor)

    sigma_prior, phi_prior = priors
    to_u, from_u, log_jac = _phi_transform(phi_prior)
    z = factor.whiten(gp_field.values)

    if fix_variance:
        sigma2_new = params.sigma2
    else:
        sigma2_new = params.sigma2 * math.exp(s_sigma * rng.standard_normal())
    try:
        phi_new = from_u(to_u(params.phi) + s_phi * rng.standard_normal())
        proposal = ExpKernelParams(sigma2_new, phi_new)
    except (ValidationError, ValueError, OverflowError):
        return HyperUpdate(params, gp_field, False, cur_loglik, factor)

    def log_target(p: ExpKernelParams, ll: float) -> float:
        value = ll + phi_prior.logpdf(p.phi) + log_jac(p.phi)
        if not fix_variance:
            value += sigma_prior.logpdf(p.sigma2) + math.log(p.sigma2)
        return value

    new_factor = grid_factor(grid, proposal)
    new_values = new_factor.color(z)
    new_ll = loglik(new_values)
    log_ratio = log_target(proposal, new_ll) - log_target(params, cur_loglik)
    if np.isfinite(log_ratio) and math.log(rng.uniform()) < log_ratio:
        return HyperUpdate(proposal, gp_field.with_values(new_values, proposal), True, float(new_ll), new_factor)
    return HyperUpdate(params, gp_field, False, cur_loglik, factor)


def conjugate_variance_update(
    params: ExpKernelParams,
    gp_field: GpField,
    factor: CovarianceFactor,
    prior: InverseGammaPrior,
    rng: np.random.Generator,
) -> Tuple[ExpKernelParams, CovarianceFactor]:
    """sigma2 | field ~ IG(shape + N/2, scale + field' R^{-1} field / 2) with R the correlation"""
    z = factor.whiten(gp_field.values)
    quad = params.sigma2 * float(z @ z)
    shape = prior.shape + 0.5 * z.size
    scale = prior.scale + 0.5 * quad
    sigma2_new = scale / rng.gamma(shape)
    ratio = math.sqrt(sigma2_new / params.sigma2)
    new_params = ExpKernelParams(sigma2_new, params.phi)
    new_factor = CovarianceFactor(
        matrix=factor.matrix * (sigma2_new / params.sigma2),
        chol=factor.chol * ratio,
        jitter=factor.jitter * (sigma2_new / params.sigma2),
    )
    return new_params, new_factor


def gibbs_linear_block(
    design: np.ndarray,
    resid: np.ndarray,
    tau2: float,
    prior_prec: Union[float, np.ndarray],
    rng: np.random.Generator,
    prior_mean: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Exact draw of coefficients b in resid = design b + N(0, tau2) under a N(prior_mean, prior_prec^-1) prior"""
    design = np.asarray(design, dtype=float)
    p = design.shape[1]
    if p == 0:
        return np.zeros(0)
    prec_diag = np.broadcast_to(np.asarray(prior_prec, dtype=float), (p,))
    m0 = np.zeros(p) if prior_mean is None else np.asarray(prior_mean, dtype=float)
    q = design.T @ design / tau2 + np.diag(prec_diag)
    rhs = design.T @ np.asarray(resid, dtype=float) / tau2 + prec_diag * m0
    chol = linalg.cholesky(q, lower=True)
    mean = linalg.cho_solve((chol, True), rhs)
    return mean + linalg.solve_triangular(chol.T, rng.standard_normal(p), lower=False)


def gibbs_variance(resid: np.ndarray, prior: InverseGammaPrior, rng: np.random.Generator) -> float:
    """Nugget full conditional IG(shape + n/2, scale + SSR/2)"""
    resid = np.asarray(resid, dtype=float)
    shape = prior.shape + 0.5 * resid.size
    scale = prior.scale + 0.5 * float(resid @ resid)
    return float(scale / rng.gamma(shape))


class ChainRunner:
    """
    Single-chain sampler over a ModelContext. All randomness comes from one
    generator so identical seeds reproduce identical draws.
    """

    def __init__(self, ctx: ModelContext, config: McmcConfig, initial: Optional[ParamState] = None):
        self.ctx = ctx
        self.config = config
        self.rng = make_rng(config.seed)
        self.state = initial.copy() if initial is not None else ctx.initial_state()
        self.monitor = get_performance_monitor()
        self.factors: Dict[str, Tuple[ExpKernelParams, CovarianceFactor]] = {}
        self.steps: Dict[str, List[float]] = {}
        self.accepts: Dict[str, List[int]] = {}
        self.alpha_precond: List[np.ndarray] = []
        self.iteration = 0
        self._pending_coreg = (self.state.coreg.a11, self.state.coreg.a21, self.state.coreg.a22)
        self._init_blocks()
        self._check_initial()
        logger.info(
            f"Sampler initialized for {ctx.family.value}/{ctx.scenario.value}: "
            f"burn={config.n_burn}, keep={config.n_keep}, thin={config.thin}"
        )

    def _init_blocks(self):
        cfg = self.config
        for k in range(self.ctx.n_lgcp):
            self.steps[f"eta{k + 1}_hyper"] = [cfg.step_log_sigma2, cfg.step_logit_phi]
            self.steps[f"alpha{k + 1}"] = [cfg.step_alpha]
            xpts = self.ctx.lgcp_xpts[k]
            p = self.ctx.p_int
            precond = np.eye(p)
            if xpts.shape[0] > p and p:
                try:
                    precond = linalg.cholesky(np.linalg.inv(xpts.T @ xpts) * xpts.shape[0], lower=True)
                except (linalg.LinAlgError, np.linalg.LinAlgError):
                    precond = np.eye(p)
            self.alpha_precond.append(precond)
        for i in self.ctx.active_w:
            self.steps[f"w{i + 1}_hyper"] = [0.0, cfg.step_logit_phi]
        self.accepts = {name: [0, 0] for name in self.steps}

    def _check_initial(self):
        terms = self.ctx.log_posterior_terms(self.state)
        for name, value in terms.items():
            if not np.isfinite(value):
                logger.error(f"Posterior term {name} is not finite at initialization: {value}")
                raise LikelihoodError(f"Non-finite posterior at initialization ({value})", term=name)

    # ---- helpers ----

    def _factor(self, name: str, params: ExpKernelParams) -> CovarianceFactor:
        cached = self.factors.get(name)
        if cached is None or cached[0] != params:
            with self.monitor.timed("factorize"):
                cached = (params, grid_factor(self.ctx.grid, params))
            self.factors[name] = cached
        return cached[1]

    def _store_factor(self, name: str, factor: CovarianceFactor, params: ExpKernelParams):
        self.factors[name] = (params, factor)

    def _record(self, block: str, accepted: bool):
        self.accepts[block][0] += int(accepted)
        self.accepts[block][1] += 1
        if self.config.adapt and self.iteration < self.config.n_burn:
            gain = 1.0 / (self.iteration + 1.0) ** 0.6
            scale = math.exp(gain * (float(accepted) - self.config.target_accept))
            self.steps[block] = [s * scale for s in self.steps[block]]

    def _field_loglik(self, name: str) -> Callable[[np.ndarray], float]:
        """Log-likelihood of every term that involves the named field, as a function of its values"""
        ctx, state = self.ctx, self.state
        pieces = []
        for j in ctx.responses:
            load = ctx.loading(state, j).get(name, 0.0)
            if load == 0.0:
                continue
            resid = ctx.y[ctx.obs_index[j], j] - ctx.response_mean(state, j, exclude=name)
            pieces.append((resid, load, ctx.obs_cells[j], state.tau2[j]))
        lgcp_k = int(name[-1]) - 1 if name.startswith("eta") else None

        def loglik(values: np.ndarray) -> float:
            total = ctx.lgcp_term(state, lgcp_k, eta_values=values) if lgcp_k is not None else 0.0
            for resid, load, cells, tau2 in pieces:
                r = resid - load * values[cells]
                total -= 0.5 * float(r @ r) / tau2
            return total

        return loglik

    # ---- blocks ----

    def _update_eta(self, k: int):
        ctx, state, cfg = self.ctx, self.state, self.config
        name = f"eta{k + 1}"
        params = state.eta_kernels[k]
        factor = self._factor(name, params)
        loglik = self._field_loglik(name)
        with self.monitor.timed("ess_field"):
            values, ll = _ess_step(state.eta[k].values, loglik, factor.chol, self.rng)
        gp = state.eta[k].with_values(values)

        with self.monitor.timed("hyper_move"):
            move = update_hyperparams(
                params, gp, loglik, (ctx.priors.sigma2, ctx.priors.phi),
                tuple(self.steps[f"{name}_hyper"]), self.rng, cur_loglik=ll, factor=factor,
            )
        self._record(f"{name}_hyper", move.accepted)
        params, gp, factor = move.params, move.field, move.factor
        if cfg.conjugate_variance and isinstance(ctx.priors.sigma2, InverseGammaPrior):
            params, factor = conjugate_variance_update(params, gp, factor, ctx.priors.sigma2, self.rng)
            gp = gp.with_values(gp.values, params)
        self._store_factor(name, factor, params)
        state.eta_kernels[k] = params
        state.eta[k] = gp.with_values(gp.values, params)

    def _update_alpha(self, k: int):
        ctx, state = self.ctx, self.state
        block = f"alpha{k + 1}"
        step = self.steps[block][0]
        if ctx.p_int == 0 or step == 0.0:
            return
        current = state.alpha[k]
        proposal = current + step * (self.alpha_precond[k] @ self.rng.standard_normal(ctx.p_int))
        cur = ctx.lgcp_term(state, k) + ctx.priors.alpha.logpdf(current)
        new = ctx.lgcp_term(state, k, alpha=proposal) + ctx.priors.alpha.logpdf(proposal)
        accepted = bool(np.isfinite(new) and math.log(self.rng.uniform()) < new - cur)
        if accepted:
            state.alpha[k] = proposal
        self._record(block, accepted)

    def _update_w(self, i: int):
        ctx, state = self.ctx, self.state
        name = f"w{i + 1}"
        params = state.w_kernels[i]
        factor = self._factor(name, params)
        loglik = self._field_loglik(name)
        with self.monitor.timed("ess_field"):
            values, ll = _ess_step(state.w[i].values, loglik, factor.chol, self.rng)
        gp = state.w[i].with_values(values)
        with self.monitor.timed("hyper_move"):
            move = update_hyperparams(
                params, gp, loglik, (ctx.priors.sigma2, ctx.priors.phi_w),
                tuple(self.steps[f"{name}_hyper"]), self.rng, fix_variance=True, cur_loglik=ll, factor=factor,
            )
        self._record(f"{name}_hyper", move.accepted)
        self._store_factor(name, move.factor, move.params)
        state.w_kernels[i] = move.params
        state.w[i] = move.field.with_values(move.field.values, move.params)

    def _update_linear(self, j: int):
        """Gibbs draw of beta_j with the latent loadings of response j"""
        ctx, state, pr = self.ctx, self.state, self.ctx.priors
        rows, cells = ctx.obs_index[j], ctx.obs_cells[j]
        resid = ctx.y[rows, j].copy()
        columns = [ctx.x_resp[rows]] if ctx.p_resp else []
        precisions = [np.full(ctx.p_resp, pr.beta.precision)] if ctx.p_resp else []
        means = [np.full(ctx.p_resp, pr.beta.mean)] if ctx.p_resp else []
        labels: List[str] = []

        link = ctx.eta_link[j]
        if link is not None:
            eta_cells = state.eta[link].values[cells]
            if self.config.sample_gamma:
                columns.append(eta_cells[:, None])
                precisions.append(np.array([pr.gamma.precision]))
                means.append(np.array([pr.gamma.mean]))
                labels.append("gamma")
            else:
                resid = resid - state.gamma[j] * eta_cells
        for i in ctx.active_w:
            if i == 1 and j == 0:
                continue
            columns.append(state.w[i].values[cells][:, None])
            precisions.append(np.array([pr.coreg.precision]))
            means.append(np.array([pr.coreg.mean]))
            labels.append(f"w{i + 1}")
        if not columns:
            return
        design = np.column_stack(columns)
        draw = gibbs_linear_block(design, resid, state.tau2[j], np.concatenate(precisions), self.rng, np.concatenate(means))
        if ctx.p_resp:
            state.beta[j] = draw[:ctx.p_resp]
        coefs = dict(zip(labels, draw[ctx.p_resp:]))
        if "gamma" in coefs:
            state.gamma[j] = coefs["gamma"]
        a11, a21, a22 = self._pending_coreg
        if "w1" in coefs:
            if j == 0:
                a11 = coefs["w1"]
            else:
                a21 = coefs["w1"]
        if "w2" in coefs:
            a22 = coefs["w2"]
        self._pending_coreg = (a11, a21, a22)

    def _fold_signs(self):
        """Reflect (w1, a11, a21) and (w2, a22) so that a11, a22 >= 0; the posterior is invariant under both"""
        state = self.state
        a11, a21, a22 = self._pending_coreg
        if a11 < 0.0:
            a11, a21 = -a11, -a21
            state.w[0] = state.w[0].with_values(-state.w[0].values)
        if a22 < 0.0:
            a22 = -a22
            state.w[1] = state.w[1].with_values(-state.w[1].values)
        state.coreg = CoregCoef(a11=a11, a21=a21, a22=a22)
        self._pending_coreg = (a11, a21, a22)

    def _update_tau2(self, j: int):
        ctx, state = self.ctx, self.state
        resid = ctx.y[ctx.obs_index[j], j] - ctx.response_mean(state, j)
        if isinstance(ctx.priors.tau2, InverseGammaPrior):
            state.tau2[j] = gibbs_variance(resid, ctx.priors.tau2, self.rng)
        else:
            raise SamplerError("Nugget updates need an inverse-gamma prior")

    def sweep(self):
        ctx = self.ctx
        for k in range(ctx.n_lgcp):
            self._update_eta(k)
            self._update_alpha(k)
        for i in ctx.active_w:
            self._update_w(i)
        self._pending_coreg = (self.state.coreg.a11, self.state.coreg.a21, self.state.coreg.a22)
        for j in ctx.responses:
            self._update_linear(j)
        if ctx.active_w:
            self._fold_signs()
        for j in ctx.responses:
            self._update_tau2(j)
        self.iteration += 1

    def run(self) -> PosteriorDraws:
        cfg, ctx = self.config, self.ctx
        names = ctx.param_names()
        field_names = ctx.field_names()
        n_draws = cfg.n_draws
        traces = {name: np.empty(n_draws) for name in names}
        snapshots: Dict[str, List[np.ndarray]] = {name: [] for name in field_names}
        snapshot_index: List[int] = []

        total = cfg.n_burn + n_draws * cfg.thin
        start = time.perf_counter()
        kept = 0
        for it in tqdm(range(total), disable=not cfg.progress, desc=f"{ctx.family.value}", leave=False):
            with self.monitor.timed("sweep"):
                self.sweep()
            if it + 1 == cfg.n_burn:
                logger.debug(f"Burn-in finished; frozen steps {self.steps}")
            if it >= cfg.n_burn and (it - cfg.n_burn + 1) % cfg.thin == 0:
                values = ctx.state_to_dict(self.state)
                for name in names:
                    traces[name][kept] = values[name]
                if kept % cfg.field_thin == 0:
                    snapshot_index.append(kept)
                    for name in field_names:
                        snapshots[name].append(np.array(ctx.field_values(self.state, name)))
                kept += 1
        elapsed = time.perf_counter() - start

        bad = [name for name, tr in traces.items() if not np.all(np.isfinite(tr))]
        if bad:
            raise SamplerError(f"Non-finite draws for {bad}")

        acceptance = {k: (a / n if n else float("nan")) for k, (a, n) in self.accepts.items()}
        ess = ess_report(traces) if n_draws else {}
        draws = PosteriorDraws(
            family=ctx.family.value,
            scenario=ctx.scenario.value,
            traces=traces,
            fields={name: np.array(v).reshape(len(v), ctx.grid.n_cells) for name, v in snapshots.items()},
            field_draw_index=np.asarray(snapshot_index, dtype=int),
            acceptance=acceptance,
            ess=ess,
            meta=self._meta(elapsed),
        )
        logger.info(f"Chain {ctx.family.value}/{ctx.scenario.value} finished {total} sweeps in {elapsed:.1f}s")
        alerts = ConvergenceAlertManager(ess_floor=cfg.target_ess)
        label = f"{ctx.family.value}/{ctx.scenario.value}"
        alerts.check_ess(ess, label)
        alerts.check_acceptance(acceptance, label)
        return draws

    def _meta(self, elapsed: float) -> Dict[str, object]:
        ctx, cfg = self.ctx, self.config
        region = ctx.grid.region
        return {
            "grid": {
                "xmin": region.xmin, "xmax": region.xmax, "ymin": region.ymin, "ymax": region.ymax,
                "nx": ctx.grid.nx, "ny": ctx.grid.ny,
            },
            "p_int": ctx.p_int,
            "p_resp": ctx.p_resp,
            "fix_response_mean": ctx.fix_response_mean,
            "separable": ctx.separable,
            "n_burn": cfg.n_burn,
            "n_keep": cfg.n_keep,
            "thin": cfg.thin,
            "seed": cfg.seed if isinstance(cfg.seed, int) or cfg.seed is None else str(cfg.seed),
            "elapsed_s": elapsed,
        }


def run_chain(
    scenario: Scenario,
    family: ModelFamily,
    data: BivariateDataset,
    config: McmcConfig,
    grid: Optional[GridApprox] = None,
    priors: Optional[PriorSet] = None,
    fix_response_mean: bool = False,
    separable: bool = False,
    initial: Optional[ParamState] = None,
) -> PosteriorDraws:
    """Fit one model family to data; deterministic given config.seed"""
    grid = grid or build_grid(data.region, 30)
    ctx = ModelContext(scenario, family, data, grid, priors, fix_response_mean=fix_response_mean, separable=separable)
    return ChainRunner(ctx, config, initial).run()
