"""The limit of scaled mutual information and its consequences.

For generators behaving like ``shift + coeff * x^exponent`` near zero (plus an
optional exact linear component), the mutual information satisfies

    k^(d b / 2) * (I(pi | k) - offset)  ->  coeff * C_b * integral of
        pi(theta)^(1+b) |det I(theta)|^(-b/2] d theta,

with b the exponent, C_b = (2 pi)^(d b / 2) (1 - b)^(-d/2) and
offset = shift + linear_coeff (the linear part of f contributes exactly its
coefficient at every k because the ratio has unit expectation under the
likelihood). The limit functional is what constrained reference-prior search
maximizes; the Jeffreys prior maximizes it without constraints when the
branch sign conditions hold.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .divergences import DivergenceGen, validate_theorem_conditions
from .errors import ConditionsNotMet, DomainError, IntegrabilityError
from .estimators import MIEstimate, exact_bernoulli_mi, mc_mutual_information
from .models import StatModel, fisher_information
from .parallel import rng_substream, sequence_map
from .priors import Prior, density_on_grid, require_normalized, restrict_normalize
from .quadrature import DEFAULT_QUAD, QuadSpec, log_integrate
from .specfun import log_beta

__all__ = [
    "ConvergenceSeries",
    "c_beta",
    "limit_functional",
    "limit_functional_beta_bernoulli",
    "convergence_series",
    "jeffreys_gap",
]


def c_beta(d: int, beta: float) -> float:
    """The rate constant (2 pi)^(d beta / 2) * (1 - beta)^(-d / 2)."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if beta >= 1.0:
        raise DomainError(f"the constant requires beta < 1, got {beta}")
    if beta == 0.0:
        raise DomainError("beta = 0 is outside both asymptotic regimes")
    return (2.0 * math.pi) ** (d * beta / 2.0) * (1.0 - beta) ** (-d / 2.0)


def _require_profile(gen: DivergenceGen) -> None:
    if gen.profile is None:
        raise DomainError(
            f"generator {gen.name!r} has no small-x power profile; the limit "
            "functional is not defined for it")


def limit_functional(model: StatModel, prior: Prior, gen: DivergenceGen,
                     spec: QuadSpec = DEFAULT_QUAD, n_mc: int = 65536,
                     seed: int = 0) -> float:
    """coeff * C_beta * integral of pi^(1+beta) |det Fisher|^(-beta/2).

    Quadrature at d=1 (endpoint-graded, with divergence detection); prior
    importance sampling at d>=2, using E_pi[pi^beta |I|^(-beta/2)].
    """
    _require_profile(gen)
    require_normalized(prior, "limit_functional")
    beta = gen.profile.exponent
    coeff = gen.profile.coeff
    d = model.dim
    if prior.dim != d:
        raise DomainError("prior and model dimensions differ")
    constant = coeff * c_beta(d, beta)

    if d == 1:
        if prior.beta_params is not None and model.model_id == "bernoulli":
            # closed-form integrability precheck for Beta-on-Bernoulli
            a, b = prior.beta_params
            if min((a - 1.0) * (1.0 + beta) + 1.0 + beta / 2.0,
                   (b - 1.0) * (1.0 + beta) + 1.0 + beta / 2.0) <= 0.0:
                raise IntegrabilityError(
                    f"Beta({a:g},{b:g}) with exponent {beta:g} gives a divergent "
                    "limit integral")
        if model.log_det_fisher_grid is not None:
            grid_logdet = model.log_det_fisher_grid
        else:
            def grid_logdet(grid):
                return np.array([
                    float(np.linalg.slogdet(fisher_information(model, t))[1])
                    for t in grid.theta])

        def log_fn(grid):
            return ((1.0 + beta) * density_on_grid(prior, grid)
                    - 0.5 * beta * np.asarray(grid_logdet(grid), dtype=float))

        log_integral = log_integrate(log_fn, *prior.interval, spec,
                                     grid_aware=True, check_endpoints=True)
        return constant * math.exp(log_integral)

    if prior.sampler is None:
        raise DomainError("the d >= 2 limit functional needs a prior sampler")
    draws = prior.sampler(rng_substream(seed, 0), n_mc)
    log_pi = np.asarray(prior.log_density(draws), dtype=float)
    log_det = np.array([
        float(np.linalg.slogdet(fisher_information(model, draw))[1]) for draw in draws])
    vals = np.exp(beta * log_pi - 0.5 * beta * log_det)
    if not np.all(np.isfinite(vals)):
        raise IntegrabilityError("limit functional Monte Carlo produced non-finite terms")
    return constant * float(np.mean(vals))


def limit_functional_beta_bernoulli(a: float, b: float, beta: float, coeff: float) -> float:
    """Closed form of the limit functional for a Beta(a, b) prior on the
    Bernoulli model: coeff C_beta B(a,b)^-(1+beta) B(ea, eb) with
    e = (shape-1)(1+beta) + 1 + beta/2."""
    if not (a > 0.0 and b > 0.0):
        raise DomainError(f"Beta shapes must be positive, got ({a}, {b})")
    if not (-1.0 < beta < 1.0) or beta == 0.0:
        raise DomainError(f"exponent must lie in (-1,0) or (0,1), got {beta}")
    ea = (a - 1.0) * (1.0 + beta) + 1.0 + beta / 2.0
    eb = (b - 1.0) * (1.0 + beta) + 1.0 + beta / 2.0
    if ea <= 0.0 or eb <= 0.0:
        raise IntegrabilityError(
            f"Beta({a:g},{b:g}) violates the integrability condition for "
            f"exponent {beta:g} (needs (shape-1)(1+beta) + 1 + beta/2 > 0)")
    log_val = -(1.0 + beta) * log_beta(a, b) + log_beta(ea, eb)
    return coeff * c_beta(1, beta) * math.exp(log_val)


@dataclass(frozen=True)
class ConvergenceSeries:
    """Scaled mutual-information values along increasing k with their limit."""

    model_id: str
    prior_id: str
    gen_name: str
    ks: tuple[int, ...]
    mi_raw: tuple[float, ...]
    mi_stderr: tuple[float, ...]
    scaled_mi: tuple[float, ...]
    limit_value: float
    fitted_rate: float
    offset: float

    def __post_init__(self) -> None:
        if not all(k2 > k1 for k1, k2 in zip(self.ks, self.ks[1:])):
            raise DomainError("ks must be strictly increasing")
        if not (len(self.ks) == len(self.mi_raw) == len(self.mi_stderr) == len(self.scaled_mi)):
            raise DomainError("series field lengths differ")

    def rows(self) -> list[dict]:
        out = []
        for k, raw, err, scaled in zip(self.ks, self.mi_raw, self.mi_stderr, self.scaled_mi):
            out.append({
                "k": k,
                "mi_raw": raw,
                "mi_shifted": raw - self.offset,
                "scaled": scaled,
                "limit": self.limit_value,
                "stderr": err,
            })
        return out


def _fit_rate(ks: np.ndarray, residuals: np.ndarray) -> float:
    """Least-squares slope of log |MI - offset| against log k, last half."""
    use = max(2, math.ceil(len(ks) / 2))
    x = np.log(ks[-use:].astype(float))
    mags = np.abs(residuals[-use:])
    if np.any(mags <= 0.0) or x.size < 2 or np.ptp(x) == 0.0:
        return math.nan
    y = np.log(mags)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def convergence_series(model: StatModel, prior: Prior, gen: DivergenceGen,
                       ks, method: str = "exact_count", n_theta: int = 400,
                       n_y: int = 400, n_marginal: int = 400, seed: int = 0,
                       spec: QuadSpec = DEFAULT_QUAD,
                       threads: int | None = None) -> ConvergenceSeries:
    """k^(d beta/2)-scaled, offset-corrected MI along ks, with its limit.

    Refuses generators without a power profile (the scaling is undefined for
    the Kullback-Leibler case; report those series unscaled instead).
    """
    _require_profile(gen)
    ks = tuple(int(k) for k in ks)
    d = model.dim
    beta = gen.profile.exponent
    offset = gen.offset

    if method == "exact_count":
        if model.model_id != "bernoulli":
            raise DomainError("exact_count series are only available for the Bernoulli model")

        def one(k: int) -> MIEstimate:
            return exact_bernoulli_mi(prior, k, gen, spec)

    elif method == "nested_mc":
        def one(k: int) -> MIEstimate:
            return mc_mutual_information(model, prior, k, gen, n_theta, n_y, n_marginal,
                                         seed, spec, threads=1)

    else:
        raise DomainError(f"unknown series method {method!r}")

    estimates = sequence_map(one, ks, threads)
    raw = np.array([e.value for e in estimates])
    stderr = np.array([e.stderr for e in estimates])
    scale = np.array([k ** (d * beta / 2.0) for k in ks])
    scaled = scale * (raw - offset)
    limit_value = limit_functional(model, prior, gen, spec)
    rate = _fit_rate(np.array(ks), raw - offset)
    return ConvergenceSeries(
        model_id=model.model_id,
        prior_id=prior.prior_id,
        gen_name=gen.name,
        ks=ks,
        mi_raw=tuple(float(v) for v in raw),
        mi_stderr=tuple(float(v) for v in stderr),
        scaled_mi=tuple(float(v) for v in scaled),
        limit_value=float(limit_value),
        fitted_rate=float(rate),
        offset=float(offset),
    )


def jeffreys_gap(model: StatModel, prior: Prior, gen: DivergenceGen,
                 compact=None, spec: QuadSpec = DEFAULT_QUAD) -> float:
    """l(Jeffreys) - l(prior) on a common region; >= 0 under the branch
    sign conditions, with equality only for the Jeffreys prior itself.

    When those conditions fail the gap is still computed but a
    ``ConditionsNotMet`` warning flags it as non-certified.
    """
    from .priors import jeffreys_prior  # local import to avoid cycle at module load

    _require_profile(gen)
    report = validate_theorem_conditions(gen)
    if not (report.exponent_in_range and report.coeff_sign_ok):
        warnings.warn(
            f"generator {gen.name!r} fails the Jeffreys-optimality sign conditions "
            f"on the {report.branch} branch; the gap is not certified nonnegative",
            ConditionsNotMet, stacklevel=2)
    if compact is None:
        region = prior.interval if prior.dim == 1 else prior.support
    else:
        region = compact
    jeff = jeffreys_prior(model, region, spec)
    if prior.dim == 1:
        lo, hi = jeff.interval
        if prior.interval != (lo, hi) or not prior.normalized:
            prior = restrict_normalize(prior, (lo, hi), spec)
    l_jeff = limit_functional(model, jeff, gen, spec)
    l_prior = limit_functional(model, prior, gen, spec)
    return l_jeff - l_prior
