"""Joint model, priors, MCMC and posterior prediction"""
from .priors import InverseGammaPrior, NormalPrior, PriorSet, UniformPrior, priors_default, priors_from_config
from .model import (
    BivariateDataset,
    ModelContext,
    ModelFamily,
    ParamState,
    Scenario,
    cokrige,
    joint_log_posterior,
    marginal_response_loglik,
    response_loglik,
)
from .diagnostics import autocorrelation, effective_sample_size
from .mcmc import (
    McmcConfig,
    PosteriorDraws,
    ess_update_field,
    gibbs_linear_block,
    run_chain,
    update_hyperparams,
)
from .predict import (
    DependenceSummary,
    PredictiveDraws,
    dependence_curves,
    dependence_summary,
    empirical_dependence,
    log_intensity_surface,
    predict_responses,
)

__all__ = [
    "InverseGammaPrior",
    "NormalPrior",
    "PriorSet",
    "UniformPrior",
    "priors_default",
    "priors_from_config",
    "BivariateDataset",
    "ModelContext",
    "ModelFamily",
    "ParamState",
    "Scenario",
    "cokrige",
    "joint_log_posterior",
    "marginal_response_loglik",
    "response_loglik",
    "autocorrelation",
    "effective_sample_size",
    "McmcConfig",
    "PosteriorDraws",
    "ess_update_field",
    "gibbs_linear_block",
    "run_chain",
    "update_hyperparams",
    "DependenceSummary",
    "PredictiveDraws",
    "dependence_curves",
    "dependence_summary",
    "empirical_dependence",
    "log_intensity_surface",
    "predict_responses",
]
