"""Matrix completion with a spectral scaled Student prior, sampled by Langevin Monte Carlo."""

from .core import (
    Dataset,
    EvalReport,
    Mask,
    Shape,
    empirical_risk,
    estimate_rank,
    evaluate,
    metric_mse,
    metric_nmse,
    metric_pred,
    project_omega,
    weighted_frobenius_sq,
)
from .prior import (
    PriorConfig,
    grad_log_prior,
    log_prior_logdet,
    log_prior_singular,
    ridge_resolvent,
)
from .posterior import (
    PosteriorSpec,
    finite_diff_grad_check,
    grad_log_posterior,
    log_posterior_unnorm,
)
from .samplers import (
    ChainResult,
    GibbsConfig,
    LmcConfig,
    lmc_step,
    mala_accept_prob,
    mala_log_q,
    mala_propose,
    run_gibbs,
    run_lmc,
    run_mala,
)

__version__ = "0.1.0"
