"""Generalized (f-divergence) mutual information for Bayesian models.

Exact and nested Monte Carlo estimators, the asymptotic limit functional with
its rate constant, Jeffreys priors and optimality gaps, and constrained
reference-prior search over Beta families.
"""

__version__ = "0.1.0"

from . import errors
from .asymptotics import (
    ConvergenceSeries,
    c_beta,
    convergence_series,
    jeffreys_gap,
    limit_functional,
    limit_functional_beta_bernoulli,
)
from .divergences import (
    AsymptoticProfile,
    DivergenceGen,
    alpha_divergence,
    divergence_from_id,
    kl_generator,
    power_divergence,
    validate_theorem_conditions,
)
from .estimators import (
    MIEstimate,
    RatioSample,
    exact_bernoulli_mi,
    marginal_log_density,
    mc_divergence,
    mc_mutual_information,
    posterior_ratio_stat,
)
from .models import (
    ContinuousObs,
    FiniteObs,
    ParamSpace,
    ScoreStat,
    StatModel,
    SubgaussDiagnostic,
    bernoulli,
    binomial,
    fisher_information,
    fisher_numeric,
    gauss_location,
    gauss_location_scale,
    log_lik_k,
    model_from_id,
    score_stat,
    subgaussian_diagnostic,
)
from .priors import (
    FamilyTag,
    Prior,
    beta_prior,
    entropy_mc,
    jeffreys_prior,
    mean_constrained_beta,
    prior_entropy,
    prior_from_id,
    restrict_normalize,
    uniform_box_prior,
    uniform_prior,
    variance_constrained_beta,
)
from .quadrature import DEFAULT_QUAD, QuadSpec
from .refsearch import (
    PriorFamily,
    SearchPoint,
    SearchResult,
    VerifyReport,
    constant_family,
    family_from_id,
    maximize_over_family,
    mean_beta_family,
    select_by_entropy,
    var_beta_family,
    verify_reference,
)

__all__ = [name for name in dir() if not name.startswith("_")]
