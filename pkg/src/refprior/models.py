"""Parametric sampling models: likelihood machinery, Fisher information, tails.

A ``StatModel`` bundles the callables the estimation code needs. Density
evaluations are raw (no argument checking) so quadrature can call them on
large node vectors; the public operations below validate their inputs and
raise semantic errors. Built-in families: Bernoulli, Binomial(n), Gaussian
location with known sigma, and a 2-parameter Gaussian location-scale model
that exercises the d=2 API.

Conventions
-----------
* theta is a float for d=1 models (vectorized over numpy arrays) and a
  length-d numpy array for d >= 2.
* ``sampler(theta, rng, size=None)`` returns one observation or a vector.
* For d=1 models, optional sufficient-statistic hooks collapse a dataset to a
  compact summary so the product likelihood over k observations costs O(1)
  per quadrature node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import DomainError, EstimateDiverged, IdParseError, NonFiniteLogLik, NotPositiveDefinite, QuadratureFailure
from .ids import parse_id, reject_extras, take_float, take_int
from .parallel import rng_substream
from .quadrature import QuadSpec, ThetaGrid, theta_grid
from .specfun import log_binom

BOUNDARY_GUARD = 1e-12
_FD_STEP = float(np.cbrt(np.finfo(float).eps))  # ~6.06e-6
_PD_TOL = 1e-12

OBS_QUAD = QuadSpec(nodes=100, panels=8, grade_levels=4, grade_nodes=12, max_refinements=5)


@dataclass(frozen=True)
class FiniteObs:
    """Finite observation space given by its atoms."""

    atoms: tuple[float, ...]


@dataclass(frozen=True)
class ContinuousObs:
    """Continuous observation space with a reference-measure tag."""

    dim: int = 1
    measure: str = "lebesgue"


@dataclass(frozen=True)
class ParamSpace:
    """Open parameter box with an optional compact sub-box."""

    box: tuple[tuple[float, float], ...]
    compact: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        for lo, hi in self.box:
            if not hi > lo:
                raise DomainError(f"empty box interval ({lo}, {hi})")
        if self.compact is not None:
            if len(self.compact) != len(self.box):
                raise DomainError("compact and box dimensions differ")
            for (clo, chi), (blo, bhi) in zip(self.compact, self.box):
                if not (blo < clo <= chi < bhi) or not (chi > clo):
                    raise DomainError(
                        f"compact [{clo}, {chi}] is not strictly inside ({blo}, {bhi})")

    @property
    def dim(self) -> int:
        return len(self.box)


@dataclass(frozen=True)
class StatModel:
    """A parametric model and the hooks the estimators can exploit."""

    model_id: str
    param_space: ParamSpace
    obs_space: FiniteObs | ContinuousObs
    log_lik: Callable[..., Any]
    sampler: Callable[..., Any]
    score: Callable[..., Any] | None = None
    fisher_analytic: Callable[..., Any] | None = None
    suff_stat: Callable[..., Any] | None = None
    log_lik_suff: Callable[..., Any] | None = None
    obs_bounds: Callable[..., tuple[float, float]] | None = None
    log_det_fisher: Callable[..., np.ndarray] | None = None
    log_det_fisher_grid: Callable[[ThetaGrid], np.ndarray] | None = None
    score_sq_norm: Callable[..., np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.param_space.dim


@dataclass(frozen=True)
class ScoreStat:
    """Normalized score sum (1/sqrt(k)) sum_i grad log lik(y_i | theta)."""

    s_k: np.ndarray
    k: int
    theta: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.s_k)):
            raise NonFiniteLogLik(f"score statistic has non-finite entries: {self.s_k}")


@dataclass(frozen=True)
class SubgaussDiagnostic:
    """Monte Carlo check of the score's Gaussian-tail moment condition."""

    estimate: float
    passes: bool
    sigma: float
    n_samples: int
    seed: int


def _theta_vector(model: StatModel, theta) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(theta, dtype=float))
    if vec.shape != (model.dim,):
        raise DomainError(
            f"theta has shape {vec.shape}, expected ({model.dim},) for model {model.model_id!r}")
    return vec


def check_in_box(model: StatModel, theta) -> np.ndarray:
    """Validate theta strictly inside the open box (1e-12 endpoint guard)."""
    vec = _theta_vector(model, theta)
    for value, (lo, hi) in zip(vec, model.param_space.box):
        if not np.isfinite(value):
            raise DomainError(f"theta component {value} is not finite")
        if np.isfinite(lo) and value - lo < BOUNDARY_GUARD:
            raise DomainError(f"theta component {value} is at or below the open bound {lo}")
        if np.isfinite(hi) and hi - value < BOUNDARY_GUARD:
            raise DomainError(f"theta component {value} is at or above the open bound {hi}")
    return vec


def _scalar_theta(model: StatModel, vec: np.ndarray):
    return float(vec[0]) if model.dim == 1 else vec


def log_lik_k(model: StatModel, ys, theta) -> float:
    """Sum of per-observation log likelihoods (never exponentiates products)."""
    vec = check_in_box(model, theta)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    if ys.shape[0] < 1:
        raise DomainError("log_lik_k needs at least one observation")
    arg = _scalar_theta(model, vec)
    if model.suff_stat is not None and model.log_lik_suff is not None:
        total = float(np.asarray(model.log_lik_suff(model.suff_stat(ys), arg)))
    else:
        total = math.fsum(float(model.log_lik(y, arg)) for y in ys)
    if math.isnan(total) or total == math.inf:
        raise NonFiniteLogLik(
            f"log likelihood of model {model.model_id!r} is {total} at theta={theta}")
    return total


def _fd_score(model: StatModel, y, vec: np.ndarray) -> np.ndarray:
    out = np.empty(model.dim)
    for i in range(model.dim):
        h = _FD_STEP * (1.0 + abs(vec[i]))
        up = vec.copy()
        dn = vec.copy()
        up[i] += h
        dn[i] -= h
        f_up = float(model.log_lik(y, _scalar_theta(model, up)))
        f_dn = float(model.log_lik(y, _scalar_theta(model, dn)))
        out[i] = (f_up - f_dn) / (2.0 * h)
    return out


def _score_at(model: StatModel, y, vec: np.ndarray) -> np.ndarray:
    if model.score is not None:
        return np.atleast_1d(np.asarray(model.score(y, _scalar_theta(model, vec)), dtype=float))
    return _fd_score(model, y, vec)


def score_stat(model: StatModel, ys, theta) -> ScoreStat:
    """The k-observation score statistic S_k."""
    vec = check_in_box(model, theta)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    k = ys.shape[0]
    if k < 1:
        raise DomainError("score_stat needs at least one observation")
    total = np.zeros(model.dim)
    for y in ys:
        total += _score_at(model, y, vec)
    return ScoreStat(s_k=total / math.sqrt(k), k=k, theta=vec)


def _hessian_log_lik(model: StatModel, y, vec: np.ndarray) -> np.ndarray:
    """Per-observation Hessian: central differences of the score with one
    Richardson step (kills the h^2 truncation term)."""

    def diff(step_scale: float) -> np.ndarray:
        hess = np.empty((model.dim, model.dim))
        for i in range(model.dim):
            h = step_scale * _FD_STEP * (1.0 + abs(vec[i]))
            up = vec.copy()
            dn = vec.copy()
            up[i] += h
            dn[i] -= h
            hess[:, i] = (_score_at(model, y, up) - _score_at(model, y, dn)) / (2.0 * h)
        return hess

    refined = (4.0 * diff(0.5) - diff(1.0)) / 3.0
    return 0.5 * (refined + refined.T)


def fisher_numeric(model: StatModel, theta, spec: QuadSpec = OBS_QUAD) -> np.ndarray:
    """Fisher information as -E[Hessian of log lik], computed numerically.

    Finite observation spaces are enumerated exactly; continuous scalar
    observation spaces are integrated by adaptive quadrature until
    |delta| < max(1e-8, 1e-6 |value|). Serves as the oracle for
    ``fisher_information``.
    """
    vec = check_in_box(model, theta)
    arg = _scalar_theta(model, vec)
    if isinstance(model.obs_space, FiniteObs):
        acc = np.zeros((model.dim, model.dim))
        for y in model.obs_space.atoms:
            weight = math.exp(float(model.log_lik(y, arg)))
            acc -= weight * _hessian_log_lik(model, y, vec)
        return acc
    if model.obs_space.dim != 1:
        raise DomainError("numeric Fisher information supports only 1-d observation spaces")
    if model.obs_bounds is None:
        raise DomainError(f"model {model.model_id!r} does not define observation bounds")
    lo, hi = model.obs_bounds(arg)
    prev = None
    for level in range(spec.max_refinements + 1):
        grid = theta_grid(lo, hi, spec, level)
        acc = np.zeros((model.dim, model.dim))
        weights = np.exp(grid.log_weight)
        for y, w in zip(grid.theta, weights):
            lik = math.exp(float(model.log_lik(y, arg)))
            if lik == 0.0:
                continue
            acc -= (w * lik) * _hessian_log_lik(model, y, vec)
        if prev is not None:
            delta = float(np.max(np.abs(acc - prev)))
            if delta < max(1e-8, 1e-6 * float(np.max(np.abs(acc)))):
                return acc
        prev = acc
    raise QuadratureFailure("fisher_numeric exceeded its refinement budget")


def fisher_information(model: StatModel, theta) -> np.ndarray:
    """Fisher information matrix; analytic when available, else numeric."""
    vec = check_in_box(model, theta)
    if model.fisher_analytic is not None:
        mat = np.atleast_2d(np.asarray(model.fisher_analytic(_scalar_theta(model, vec)), dtype=float))
    else:
        mat = fisher_numeric(model, vec)
    if mat.shape != (model.dim, model.dim):
        raise DomainError(f"Fisher matrix has shape {mat.shape}, expected square of dim {model.dim}")
    sym = 0.5 * (mat + mat.T)
    eigvals = np.linalg.eigvalsh(sym)
    if np.min(eigvals) <= _PD_TOL:
        raise NotPositiveDefinite(
            f"Fisher information at theta={theta} has eigenvalue {np.min(eigvals):.3e} <= {_PD_TOL}")
    return sym


def subgaussian_diagnostic(model: StatModel, theta, sigma: float, n_samples: int,
                           seed: int) -> SubgaussDiagnostic:
    """Monte Carlo estimate of E[exp(sigma * ||score||^2)] with a pass flag.

    The flag reports whether the estimate stays below 2, the sufficient
    moment bound for the Gaussian-tail condition the asymptotic theory needs.
    """
    if n_samples < 1000:
        raise DomainError("subgaussian_diagnostic needs n_samples >= 1000")
    if sigma <= 0.0:
        raise DomainError("sigma must be positive")
    vec = check_in_box(model, theta)
    arg = _scalar_theta(model, vec)
    rng = rng_substream(seed, 0)
    ys = np.atleast_1d(np.asarray(model.sampler(arg, rng, n_samples), dtype=float))
    if model.score_sq_norm is not None:
        sq = np.asarray(model.score_sq_norm(ys, arg), dtype=float)
    else:
        sq = np.array([float(np.sum(_score_at(model, y, vec) ** 2)) for y in ys])
    with np.errstate(over="ignore"):
        terms = np.exp(sigma * sq)
    running = np.cumsum(terms) / np.arange(1, n_samples + 1)
    if not np.all(running < 1e12):
        raise EstimateDiverged(
            "running mean of exp(sigma ||score||^2) exceeded 1e12; tail too heavy for this sigma")
    estimate = float(running[-1])
    return SubgaussDiagnostic(estimate=estimate, passes=estimate < 2.0, sigma=float(sigma),
                              n_samples=int(n_samples), seed=int(seed))


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------


def _log_theta_one_minus(grid: ThetaGrid) -> tuple[np.ndarray, np.ndarray]:
    """(log theta, log(1-theta)) on a grid over a sub-interval of (0, 1)."""
    log_t = grid.log_dlo if grid.lo == 0.0 else np.log(grid.theta)
    log_1mt = grid.log_dhi if grid.hi == 1.0 else np.log1p(-grid.theta)
    return log_t, log_1mt


def bernoulli() -> StatModel:
    """Bernoulli(theta) on {0, 1}, theta in the open unit interval."""

    def log_lik(y, theta):
        theta = np.asarray(theta, dtype=float)
        return y * np.log(theta) + (1.0 - y) * np.log1p(-theta)

    def score(y, theta):
        return np.array([y / theta - (1.0 - y) / (1.0 - theta)])

    def sampler(theta, rng, size=None):
        if size is None:
            return float(rng.random() < theta)
        return (rng.random(size) < theta).astype(float)

    def suff(ys):
        ys = np.asarray(ys, dtype=float)
        return (ys.size, float(ys.sum()))

    def log_lik_suff(stat, theta):
        k, s = stat
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape)
        if s:  # avoid 0 * (-inf) at nodes rounded onto an endpoint
            out = out + s * np.log(theta)
        if k - s:
            out = out + (k - s) * np.log1p(-theta)
        return out

    def fisher(theta):
        return np.array([[1.0 / (theta * (1.0 - theta))]])

    def log_det_fisher(grid: ThetaGrid):
        log_t, log_1mt = _log_theta_one_minus(grid)
        return -(log_t + log_1mt)

    def log_det_fisher_plain(theta):
        theta = np.asarray(theta, dtype=float)
        return -(np.log(theta) + np.log1p(-theta))

    def score_sq(ys, theta):
        s = ys / theta - (1.0 - ys) / (1.0 - theta)
        return s * s

    return StatModel(
        model_id="bernoulli",
        param_space=ParamSpace(box=((0.0, 1.0),)),
        obs_space=FiniteObs(atoms=(0.0, 1.0)),
        log_lik=log_lik,
        sampler=sampler,
        score=score,
        fisher_analytic=fisher,
        suff_stat=suff,
        log_lik_suff=log_lik_suff,
        log_det_fisher=log_det_fisher_plain,
        log_det_fisher_grid=log_det_fisher,
        score_sq_norm=score_sq,
    )


def binomial(n: int) -> StatModel:
    """Binomial(n, theta) on {0, ..., n}."""
    if n < 1 or n != int(n):
        raise DomainError(f"binomial needs integer n >= 1, got {n}")
    n = int(n)
    log_coefs = np.array([log_binom(n, y) for y in range(n + 1)])

    def log_lik(y, theta):
        theta = np.asarray(theta, dtype=float)
        return log_coefs[int(y)] + y * np.log(theta) + (n - y) * np.log1p(-theta)

    def score(y, theta):
        return np.array([y / theta - (n - y) / (1.0 - theta)])

    def sampler(theta, rng, size=None):
        out = rng.binomial(n, theta, size=size)
        return float(out) if size is None else out.astype(float)

    def suff(ys):
        ys = np.asarray(ys, dtype=float)
        const = float(np.sum(log_coefs[ys.astype(int)]))
        return (ys.size, float(ys.sum()), const)

    def log_lik_suff(stat, theta):
        k, s, const = stat
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, const)
        if s:
            out = out + s * np.log(theta)
        if n * k - s:
            out = out + (n * k - s) * np.log1p(-theta)
        return out

    def fisher(theta):
        return np.array([[n / (theta * (1.0 - theta))]])

    def log_det_fisher(grid: ThetaGrid):
        log_t, log_1mt = _log_theta_one_minus(grid)
        return math.log(n) - (log_t + log_1mt)

    def log_det_fisher_plain(theta):
        theta = np.asarray(theta, dtype=float)
        return math.log(n) - (np.log(theta) + np.log1p(-theta))

    def score_sq(ys, theta):
        s = ys / theta - (n - ys) / (1.0 - theta)
        return s * s

    return StatModel(
        model_id=f"binomial:n={n}",
        param_space=ParamSpace(box=((0.0, 1.0),)),
        obs_space=FiniteObs(atoms=tuple(float(y) for y in range(n + 1))),
        log_lik=log_lik,
        sampler=sampler,
        score=score,
        fisher_analytic=fisher,
        suff_stat=suff,
        log_lik_suff=log_lik_suff,
        log_det_fisher=log_det_fisher_plain,
        log_det_fisher_grid=log_det_fisher,
        score_sq_norm=score_sq,
    )


def gauss_location(sigma: float = 1.0) -> StatModel:
    """Gaussian with unknown location and known scale sigma."""
    if not sigma > 0.0:
        raise DomainError(f"gauss_location needs sigma > 0, got {sigma}")
    var = sigma * sigma
    log_norm = -0.5 * math.log(2.0 * math.pi * var)

    def log_lik(y, theta):
        theta = np.asarray(theta, dtype=float)
        diff = y - theta
        return log_norm - 0.5 * diff * diff / var

    def score(y, theta):
        return np.array([(y - theta) / var])

    def sampler(theta, rng, size=None):
        out = rng.normal(theta, sigma, size=size)
        return float(out) if size is None else out

    def suff(ys):
        ys = np.asarray(ys, dtype=float)
        return (ys.size, float(ys.sum()), float(np.sum(ys * ys)))

    def log_lik_suff(stat, theta):
        k, total, total_sq = stat
        theta = np.asarray(theta, dtype=float)
        return k * log_norm - 0.5 * (total_sq - 2.0 * theta * total + k * theta * theta) / var

    def fisher(theta):
        return np.array([[1.0 / var]])

    def log_det_fisher(grid: ThetaGrid):
        return np.full(grid.size, -2.0 * math.log(sigma))

    def log_det_fisher_plain(theta):
        theta = np.asarray(theta, dtype=float)
        return np.full(theta.shape, -2.0 * math.log(sigma))

    def score_sq(ys, theta):
        s = (ys - theta) / var
        return s * s

    return StatModel(
        model_id=f"gauss-loc:sigma={sigma:g}",
        param_space=ParamSpace(box=((-math.inf, math.inf),)),
        obs_space=ContinuousObs(dim=1),
        log_lik=log_lik,
        sampler=sampler,
        score=score,
        fisher_analytic=fisher,
        suff_stat=suff,
        log_lik_suff=log_lik_suff,
        obs_bounds=lambda theta: (theta - 15.0 * sigma, theta + 15.0 * sigma),
        log_det_fisher=log_det_fisher_plain,
        log_det_fisher_grid=log_det_fisher,
        score_sq_norm=score_sq,
    )


def gauss_location_scale() -> StatModel:
    """Gaussian with theta = (mu, s), both unknown; exercises the d=2 API."""

    def log_lik(y, theta):
        mu, s = theta
        diff = y - mu
        return -0.5 * math.log(2.0 * math.pi) - math.log(s) - 0.5 * diff * diff / (s * s)

    def score(y, theta):
        mu, s = theta
        diff = y - mu
        return np.array([diff / (s * s), -1.0 / s + diff * diff / s**3])

    def sampler(theta, rng, size=None):
        mu, s = theta
        out = rng.normal(mu, s, size=size)
        return float(out) if size is None else out

    def fisher(theta):
        _, s = theta
        return np.array([[1.0 / (s * s), 0.0], [0.0, 2.0 / (s * s)]])

    def score_sq(ys, theta):
        mu, s = theta
        diff = ys - mu
        g1 = diff / (s * s)
        g2 = -1.0 / s + diff * diff / s**3
        return g1 * g1 + g2 * g2

    return StatModel(
        model_id="gauss-loc-scale",
        param_space=ParamSpace(box=((-math.inf, math.inf), (0.0, math.inf))),
        obs_space=ContinuousObs(dim=1),
        log_lik=log_lik,
        sampler=sampler,
        score=score,
        fisher_analytic=fisher,
        obs_bounds=lambda theta: (theta[0] - 15.0 * theta[1], theta[0] + 15.0 * theta[1]),
        score_sq_norm=score_sq,
    )


def model_from_id(text: str) -> StatModel:
    """Resolve a config id: "bernoulli", "binomial:n=10", "gauss-loc:sigma=1.0"."""
    name, params = parse_id(text)
    if name == "bernoulli":
        reject_extras(params, text)
        return bernoulli()
    if name == "binomial":
        n = take_int(params, "n", text)
        reject_extras(params, text)
        return binomial(n)
    if name == "gauss-loc":
        sigma = take_float(params, "sigma", text)
        reject_extras(params, text)
        return gauss_location(sigma)
    raise IdParseError(f"unknown model id {text!r}")
