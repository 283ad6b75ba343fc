"""Exact, quadrature and nested Monte Carlo mutual-information estimators.

Everything runs in log space: a density ratio only ever materializes inside
the generator's ``eval_log_weighted`` path, which forms likelihood-weighted
f-values as sums of stable exponentials.

For the Bernoulli model the success count is sufficient, so the exact
estimator needs one log-marginal per count (k+1 quadratures sharing one node
set) and the nested Monte Carlo path samples counts directly; this is what
makes a deterministic oracle available at every k the acceptance runs use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .divergences import DivergenceGen
from .errors import DomainError, NonFiniteValue, QuadratureFailure
from .models import StatModel, check_in_box, fisher_information, log_lik_k, score_stat
from .parallel import ordered_map, rng_substream
from .priors import Prior, density_on_grid, require_normalized
from .quadrature import DEFAULT_QUAD, QuadSpec, ThetaGrid, log_integrate, logsumexp, theta_grid
from .specfun import log_binom

Method = Literal["exact_count", "quadrature", "nested_mc"]

_CHUNK_BUDGET = 4_000_000  # floats per (counts x nodes) work block


@dataclass(frozen=True)
class MIEstimate:
    """A mutual-information value with its provenance."""

    value: float
    stderr: float
    k: int
    method: Method
    n_theta: int = 0
    n_y: int = 0
    n_marginal: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise NonFiniteValue(f"mutual information value is {self.value}")
        if (self.stderr == 0.0) != (self.method != "nested_mc"):
            raise DomainError("stderr must be 0 exactly for non-Monte-Carlo methods")


@dataclass(frozen=True)
class RatioSample:
    """One dataset's marginal/likelihood log ratio and its Laplace surrogate."""

    k: int
    theta: float
    log_ratio: float
    laplace_log: float
    s_quad: float

    def __post_init__(self) -> None:
        for name in ("log_ratio", "laplace_log", "s_quad"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteValue(f"{name} is not finite in RatioSample")


def _is_count_model(model: StatModel) -> bool:
    return model.model_id == "bernoulli"


def _grid_log_theta(grid: ThetaGrid) -> tuple[np.ndarray, np.ndarray]:
    log_t = grid.log_dlo if grid.lo == 0.0 else np.log(grid.theta)
    log_1mt = grid.log_dhi if grid.hi == 1.0 else np.log1p(-grid.theta)
    return log_t, log_1mt


def _count_table_on_grid(prior: Prior, k: int, grid: ThetaGrid) -> np.ndarray:
    """log p(s) = log int theta^s (1-theta)^(k-s) dpi(theta) for s = 0..k."""
    log_t, log_1mt = _grid_log_theta(grid)
    log_w = density_on_grid(prior, grid) + grid.log_weight
    s_all = np.arange(k + 1, dtype=float)
    out = np.empty(k + 1)
    chunk = max(1, _CHUNK_BUDGET // max(grid.size, 1))
    for start in range(0, k + 1, chunk):
        s = s_all[start:start + chunk, None]
        block = s * log_t[None, :] + (k - s) * log_1mt[None, :] + log_w[None, :]
        out[start:start + chunk] = logsumexp(block, axis=1)
    return out


def count_log_marginals(prior: Prior, k: int, spec: QuadSpec = DEFAULT_QUAD) -> np.ndarray:
    """Refined per-count log marginals for the Bernoulli model."""
    require_normalized(prior, "count_log_marginals")
    prev = None
    for level in range(spec.max_refinements + 1):
        grid = theta_grid(*prior.interval, spec, level)
        table = _count_table_on_grid(prior, k, grid)
        if prev is not None and float(np.max(np.abs(table - prev))) <= spec.rel_tol:
            return table
        prev = table
    raise QuadratureFailure("count marginals did not stabilize under refinement")


def exact_bernoulli_mi(prior: Prior, k: int, gen: DivergenceGen,
                       spec: QuadSpec = DEFAULT_QUAD) -> MIEstimate:
    """Deterministic mutual information for the Bernoulli model.

    Sufficiency of the success count collapses the 2^k observation space:
    I = int sum_s C(k,s) theta^s (1-theta)^(k-s) f(p(s) / lik(s|theta)) dpi,
    with the count marginals p(s) computed by log-space quadrature on the
    same node set as the outer integral. Exact up to quadrature tolerance.
    """
    require_normalized(prior, "exact_bernoulli_mi")
    if k < 1 or k != int(k):
        raise DomainError(f"k must be a positive integer, got {k}")
    k = int(k)
    lo, hi = prior.interval
    if lo < 0.0 or hi > 1.0:
        raise DomainError("exact_bernoulli_mi needs a prior supported inside (0, 1)")
    log_binoms = np.array([log_binom(k, s) for s in range(k + 1)])
    s_all = np.arange(k + 1, dtype=float)

    prev = None
    for level in range(spec.max_refinements + 1):
        grid = theta_grid(lo, hi, spec, level)
        log_marg = _count_table_on_grid(prior, k, grid)
        log_t, log_1mt = _grid_log_theta(grid)
        log_w = density_on_grid(prior, grid) + grid.log_weight
        total = 0.0
        chunk = max(1, _CHUNK_BUDGET // max(grid.size, 1))
        for start in range(0, k + 1, chunk):
            s = s_all[start:start + chunk, None]
            log_lik = s * log_t[None, :] + (k - s) * log_1mt[None, :]
            lw = log_w[None, :] + log_binoms[start:start + chunk, None] + log_lik
            lx = log_marg[start:start + chunk, None] - log_lik
            vals = gen.eval_log_weighted(lw, lx)
            if not np.all(np.isfinite(vals)):
                raise QuadratureFailure("exact MI accumulated a non-finite term")
            total += float(np.sum(vals))
        if prev is not None and abs(total - prev) <= max(1e-12, spec.rel_tol * abs(total)):
            return MIEstimate(value=total, stderr=0.0, k=k, method="exact_count")
        prev = total
    raise QuadratureFailure("exact_bernoulli_mi did not stabilize under refinement")


def marginal_log_density(model: StatModel, prior: Prior, ys,
                         spec: QuadSpec = DEFAULT_QUAD) -> float:
    """log of the prior-mixture density of a dataset, by refined quadrature."""
    if model.dim != 1 or prior.dim != 1:
        raise DomainError("marginal_log_density supports d = 1 only")
    require_normalized(prior, "marginal_log_density")
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    if _is_count_model(model):
        k, s = int(ys.size), int(ys.sum())

        def log_fn(grid: ThetaGrid):
            log_t, log_1mt = _grid_log_theta(grid)
            lik = np.zeros(grid.size)
            if s:
                lik = lik + s * log_t
            if k - s:
                lik = lik + (k - s) * log_1mt
            return lik + density_on_grid(prior, grid)

    elif model.suff_stat is not None and model.log_lik_suff is not None:
        stat = model.suff_stat(ys)

        def log_fn(grid: ThetaGrid):
            return (np.asarray(model.log_lik_suff(stat, grid.theta), dtype=float)
                    + density_on_grid(prior, grid))

    else:
        def log_fn(grid: ThetaGrid):
            acc = density_on_grid(prior, grid)
            for y in ys:
                acc = acc + np.asarray(model.log_lik(y, grid.theta), dtype=float)
            return acc

    return log_integrate(log_fn, *prior.interval, spec, grid_aware=True)


def _summarize(vals: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(vals) / vals.size
    var = math.fsum((v - mean) ** 2 for v in vals) / (vals.size - 1)
    return mean, math.sqrt(var / vals.size)


def _mc_divergence_impl(model: StatModel, prior: Prior, theta: float, k: int,
                        gen: DivergenceGen, n_y: int, n_marginal: int, seed: int,
                        spec: QuadSpec, count_table: np.ndarray | None) -> tuple[float, float]:
    # The exact linear component of f (if any) is integrated analytically:
    # E[marginal/likelihood] = 1 under the likelihood, so it adds exactly
    # linear_coeff. Only the sub-linear remainder is averaged over datasets;
    # the raw f-average would carry importance-weight tails that no feasible
    # n_y resolves once k is moderately large.
    if _is_count_model(model):
        if count_table is None:
            count_table = count_log_marginals(prior, k, spec)
        counts = rng_substream(seed, 0).binomial(k, theta, size=n_y)
        log_t, log_1mt = math.log(theta), math.log1p(-theta)
        log_lik = counts * log_t + (k - counts) * log_1mt
        deltas = count_table[counts] - log_lik
        vals = np.asarray(gen.eval_log_sublinear(deltas), dtype=float)
    elif model.dim == 1:
        vals = np.empty(n_y)
        for i in range(n_y):
            ys = model.sampler(theta, rng_substream(seed, 1 + i), k)
            delta = marginal_log_density(model, prior, ys, spec) - log_lik_k(model, ys, theta)
            vals[i] = gen.eval_log_sublinear(delta)
    else:
        if prior.sampler is None:
            raise DomainError("d >= 2 Monte Carlo marginals need a prior sampler")
        # common random numbers: one set of prior draws serves every dataset
        draws = prior.sampler(rng_substream(seed, n_y + 1), n_marginal)
        vals = np.empty(n_y)
        for i in range(n_y):
            ys = model.sampler(theta, rng_substream(seed, 1 + i), k)
            log_liks = np.array([log_lik_k(model, ys, draw) for draw in draws])
            log_marg = logsumexp(log_liks) - math.log(n_marginal)
            vals[i] = gen.eval_log_sublinear(log_marg - log_lik_k(model, ys, theta))
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValue("a divergence sample evaluated to a non-finite value")
    mean, stderr = _summarize(vals)
    return mean + gen.linear_coeff, stderr


def mc_divergence(model: StatModel, prior: Prior, theta, k: int, gen: DivergenceGen,
                  n_y: int, n_marginal: int, seed: int,
                  spec: QuadSpec = DEFAULT_QUAD) -> tuple[float, float]:
    """Monte Carlo estimate of D_f(marginal || likelihood at theta), k obs.

    Datasets are simulated at theta; the marginal is a deterministic
    quadrature at d=1 and a shared-draw Monte Carlo average otherwise.
    Returns (value, stderr).
    """
    require_normalized(prior, "mc_divergence")
    if n_y < 100 or n_marginal < 100:
        raise DomainError("mc_divergence needs n_y >= 100 and n_marginal >= 100")
    if k < 1:
        raise DomainError("k must be >= 1")
    vec = check_in_box(model, theta)
    theta_arg = float(vec[0]) if model.dim == 1 else vec
    return _mc_divergence_impl(model, prior, theta_arg, int(k), gen, int(n_y),
                               int(n_marginal), int(seed), spec, None)


def _task_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def mc_mutual_information(model: StatModel, prior: Prior, k: int, gen: DivergenceGen,
                          n_theta: int, n_y: int, n_marginal: int, seed: int,
                          spec: QuadSpec = DEFAULT_QUAD,
                          threads: int | None = None) -> MIEstimate:
    """Nested Monte Carlo mutual information: outer draws over the prior.

    The reported stderr is the sample deviation of the per-theta divergence
    estimates over sqrt(n_theta); since each per-theta estimate carries its
    own dataset noise, this captures the between- and within-theta variance
    components together (law of total variance).
    """
    require_normalized(prior, "mc_mutual_information")
    if prior.sampler is None:
        raise DomainError(f"prior {prior.prior_id!r} has no sampler")
    if min(n_theta, n_y, n_marginal) < 100:
        raise DomainError("mc_mutual_information budgets must all be >= 100")
    k = int(k)
    thetas = np.atleast_1d(prior.sampler(rng_substream(seed, 0), n_theta))
    count_table = count_log_marginals(prior, k, spec) if _is_count_model(model) else None

    def one(j: int) -> float:
        theta_j = thetas[j] if model.dim == 1 else thetas[j, :]
        value, _ = _mc_divergence_impl(model, prior, theta_j, k, gen, n_y, n_marginal,
                                       _task_seed(seed, j + 1), spec, count_table)
        return value

    per_theta = np.array(ordered_map(one, int(n_theta), threads))
    value, stderr = _summarize(per_theta)
    return MIEstimate(value=value, stderr=stderr, k=k, method="nested_mc",
                      n_theta=int(n_theta), n_y=int(n_y), n_marginal=int(n_marginal),
                      seed=int(seed))


def posterior_ratio_stat(model: StatModel, prior: Prior, theta, k: int, n_rep: int,
                         seed: int, spec: QuadSpec = DEFAULT_QUAD,
                         threads: int | None = None) -> list[RatioSample]:
    """Replicated marginal/likelihood log ratios with their Laplace surrogate.

    For each simulated dataset the surrogate is
    log(k^(-1/2) pi(theta) sqrt(2 pi / I(theta))) + S_k^2 / (2 I(theta)),
    the quantity the log ratio approaches for large k.
    """
    if model.dim != 1:
        raise DomainError("posterior_ratio_stat supports d = 1 only")
    require_normalized(prior, "posterior_ratio_stat")
    vec = check_in_box(model, theta)
    theta_f = float(vec[0])
    lo, hi = prior.interval
    if not (lo < theta_f < hi):
        raise DomainError(f"theta={theta_f} is not interior to the prior support ({lo}, {hi})")
    k = int(k)
    info = float(fisher_information(model, theta_f)[0, 0])
    log_pi = float(np.asarray(prior.log_density(theta_f), dtype=float))
    laplace_const = (log_pi + 0.5 * math.log(2.0 * math.pi) - 0.5 * math.log(info)
                     - 0.5 * math.log(k))
    count_table = count_log_marginals(prior, k, spec) if _is_count_model(model) else None

    def one(i: int) -> RatioSample:
        rng = rng_substream(seed, i)
        if count_table is not None:
            s = int(rng.binomial(k, theta_f))
            log_lik = s * math.log(theta_f) + (k - s) * math.log1p(-theta_f)
            log_ratio = float(count_table[s]) - log_lik
            s_k = (s / theta_f - (k - s) / (1.0 - theta_f)) / math.sqrt(k)
        else:
            ys = model.sampler(theta_f, rng, k)
            log_ratio = (marginal_log_density(model, prior, ys, spec)
                         - log_lik_k(model, ys, theta_f))
            s_k = float(score_stat(model, ys, theta_f).s_k[0])
        s_quad = 0.5 * s_k * s_k / info
        return RatioSample(k=k, theta=theta_f, log_ratio=log_ratio,
                           laplace_log=laplace_const + s_quad, s_quad=s_quad)

    return ordered_map(one, int(n_rep), threads)
