"""Prior densities: Beta families, compact restriction, Jeffreys, entropy.

A ``Prior`` is immutable: a log density on a support box, a normalization
flag, an optional sampler, and a family tag. Densities are with respect to
Lebesgue measure; unnormalized priors are representable but every mutual
information / limit operation downstream requires ``normalized=True``
(restrict first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import (
    AllUnderflow,
    DomainError,
    EstimateDiverged,
    IdParseError,
    InfeasibleMoment,
    NormalizationError,
    ZeroMass,
)
from .ids import parse_id, reject_extras, take_float
from .models import StatModel, fisher_information
from .parallel import rng_substream
from .quadrature import DEFAULT_QUAD, QUAD_2D, QuadSpec, ThetaGrid, integrate_2d, log_integrate
from .specfun import beta_entropy, log_beta

Interval = tuple[float, float]


@dataclass(frozen=True)
class FamilyTag:
    """What family a prior belongs to, with its defining parameters."""

    kind: str  # "beta" | "uniform" | "jeffreys" | "mean-beta" | "var-beta" | "custom"
    params: tuple[tuple[str, Any], ...] = ()

    def get(self, key: str, default=None):
        for name, value in self.params:
            if name == key:
                return value
        return default


@dataclass(frozen=True)
class Prior:
    """A prior density on a d-dimensional box."""

    prior_id: str
    support: tuple[Interval, ...]
    log_density: Callable[..., Any]
    normalized: bool
    family: FamilyTag
    log_norm_const: float | None = None
    sampler: Callable[..., Any] | None = None
    log_density_grid: Callable[[ThetaGrid], np.ndarray] | None = None
    beta_params: tuple[float, float] | None = None

    @property
    def dim(self) -> int:
        return len(self.support)

    @property
    def interval(self) -> Interval:
        if self.dim != 1:
            raise DomainError("interval is only defined for 1-d priors")
        return self.support[0]


def density_on_grid(prior: Prior, grid: ThetaGrid) -> np.ndarray:
    """Log density evaluated on a quadrature grid (stable path if defined)."""
    if prior.log_density_grid is not None:
        return np.asarray(prior.log_density_grid(grid), dtype=float)
    return np.asarray(prior.log_density(grid.theta), dtype=float)


def require_normalized(prior: Prior, op_name: str) -> None:
    if not prior.normalized:
        raise NormalizationError(
            f"{op_name} requires a normalized prior; restrict_normalize {prior.prior_id!r} first")


def _interval_arg(compact) -> Interval:
    if isinstance(compact, (tuple, list)) and len(compact) == 2 and np.isscalar(compact[0]):
        lo, hi = float(compact[0]), float(compact[1])
    elif isinstance(compact, (tuple, list)) and len(compact) == 1:
        lo, hi = float(compact[0][0]), float(compact[0][1])
    else:
        raise DomainError(f"expected a 1-d interval, got {compact!r}")
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise DomainError(f"bad interval ({lo}, {hi})")
    return lo, hi


def _inverse_cdf_sampler(log_density_grid: Callable[[ThetaGrid], np.ndarray],
                         lo: float, hi: float, n_cells: int = 8192) -> Callable:
    """Grid inverse-CDF sampler for a 1-d density known up to normalization.

    Trapezoid CDF in the sin^2-substituted coordinate; accuracy is ample for
    histogram emission and Monte Carlo outer loops.
    """
    half_pi = np.pi / 2.0
    u = np.linspace(0.0, half_pi, n_cells + 1)
    u_mid = u[:-1] + 0.5 * np.diff(u)
    width = hi - lo
    sin_u = np.sin(u_mid)
    cos_u = np.cos(u_mid)
    theta_mid = lo + width * sin_u * sin_u
    grid = ThetaGrid(lo=lo, hi=hi, level=0, theta=theta_mid,
                     log_weight=np.zeros_like(theta_mid),
                     log_dlo=np.log(width) + 2.0 * np.log(sin_u),
                     log_dhi=np.log(width) + 2.0 * np.log(cos_u),
                     edge_side=np.zeros(theta_mid.size, dtype=np.int8),
                     edge_depth=np.zeros(theta_mid.size, dtype=np.int32))
    log_pdf_u = np.asarray(log_density_grid(grid), dtype=float) + np.log(width * 2.0 * sin_u * cos_u)
    pdf = np.exp(log_pdf_u - np.max(log_pdf_u[np.isfinite(log_pdf_u)]))
    cdf = np.concatenate([[0.0], np.cumsum(pdf * np.diff(u))])
    if cdf[-1] <= 0.0:
        raise ZeroMass("density mass is zero on the sampling interval")
    cdf /= cdf[-1]
    theta_edges = lo + width * np.sin(u) ** 2

    def sample(rng: np.random.Generator, size=None):
        q = rng.random() if size is None else rng.random(size)
        idx = np.clip(np.searchsorted(cdf, q, side="right") - 1, 0, n_cells - 1)
        c0 = cdf[idx]
        c1 = cdf[idx + 1]
        frac = np.where(c1 > c0, (q - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.5)
        out = theta_edges[idx] + frac * (theta_edges[idx + 1] - theta_edges[idx])
        return float(out) if size is None else out

    return sample


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def uniform_prior(lo: float = 0.0, hi: float = 1.0) -> Prior:
    """Uniform density on a bounded interval."""
    lo, hi = float(lo), float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise DomainError(f"uniform_prior needs a bounded interval, got ({lo}, {hi})")
    log_d = -math.log(hi - lo)

    def log_density(theta):
        theta = np.asarray(theta, dtype=float)
        return np.where((theta > lo) & (theta < hi), log_d, -np.inf)

    return Prior(
        prior_id="uniform" if (lo, hi) == (0.0, 1.0) else f"uniform[{lo:g},{hi:g}]",
        support=((lo, hi),),
        log_density=log_density,
        normalized=True,
        family=FamilyTag("uniform", (("lo", lo), ("hi", hi))),
        log_norm_const=log_d,
        sampler=lambda rng, size=None: rng.uniform(lo, hi, size),
        log_density_grid=lambda grid: np.full(grid.size, log_d),
        beta_params=(1.0, 1.0) if (lo, hi) == (0.0, 1.0) else None,
    )


def uniform_box_prior(box: tuple[Interval, ...]) -> Prior:
    """Uniform density on a bounded d-dimensional box."""
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) == 1:
        return uniform_prior(*box[0])
    log_vol = math.fsum(math.log(hi - lo) for lo, hi in box)

    def log_density(theta):
        theta = np.asarray(theta, dtype=float)
        inside = np.ones(theta.shape[:-1], dtype=bool)
        for i, (lo, hi) in enumerate(box):
            inside &= (theta[..., i] > lo) & (theta[..., i] < hi)
        return np.where(inside, -log_vol, -np.inf)

    def sampler(rng, size=None):
        n = 1 if size is None else size
        out = np.column_stack([rng.uniform(lo, hi, n) for lo, hi in box])
        return out[0] if size is None else out

    return Prior(
        prior_id="uniform-box",
        support=box,
        log_density=log_density,
        normalized=True,
        family=FamilyTag("uniform", tuple((f"dim{i}", iv) for i, iv in enumerate(box))),
        log_norm_const=-log_vol,
        sampler=sampler,
    )


def _beta_like(a: float, b: float, prior_id: str, family: FamilyTag) -> Prior:
    log_b = log_beta(a, b)

    def log_density(theta):
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = (a - 1.0) * np.log(theta) + (b - 1.0) * np.log1p(-theta) - log_b
        return np.where((theta > 0.0) & (theta < 1.0), vals, -np.inf)

    def log_density_grid(grid: ThetaGrid):
        log_t = grid.log_dlo if grid.lo == 0.0 else np.log(grid.theta)
        log_1mt = grid.log_dhi if grid.hi == 1.0 else np.log1p(-grid.theta)
        return (a - 1.0) * log_t + (b - 1.0) * log_1mt - log_b

    return Prior(
        prior_id=prior_id,
        support=((0.0, 1.0),),
        log_density=log_density,
        normalized=True,
        family=family,
        log_norm_const=-log_b,
        sampler=lambda rng, size=None: rng.beta(a, b, size),
        log_density_grid=log_density_grid,
        beta_params=(a, b),
    )


def beta_prior(a: float, b: float) -> Prior:
    """Beta(a, b) on (0, 1) with exact log normalizer."""
    if not (a > 0.0 and b > 0.0):
        raise DomainError(f"beta_prior needs a, b > 0, got ({a}, {b})")
    a, b = float(a), float(b)
    return _beta_like(a, b, f"beta:a={a:g},b={b:g}", FamilyTag("beta", (("a", a), ("b", b))))


def mean_constrained_beta(c: float, lam: float) -> Prior:
    """Beta(lam, lam(c-1)): the Beta sub-family with mean fixed at 1/c."""
    if not c > 1.0:
        raise DomainError(f"mean_constrained_beta needs c > 1, got {c}")
    if not lam > 0.0:
        raise DomainError(f"mean_constrained_beta needs lambda > 0, got {lam}")
    a, b = float(lam), float(lam * (c - 1.0))
    return _beta_like(a, b, f"mean-beta:c={c:g},lambda={lam:g}",
                      FamilyTag("mean-beta", (("c", float(c)), ("lambda", float(lam)),
                                              ("a", a), ("b", b))))


def variance_constrained_beta(V: float, m: float) -> Prior:
    """The Beta prior with mean m and variance V (moment matching)."""
    if not (0.0 < m < 1.0):
        raise DomainError(f"variance_constrained_beta needs m in (0, 1), got {m}")
    if not V > 0.0:
        raise DomainError(f"variance_constrained_beta needs V > 0, got {V}")
    if m * (1.0 - m) <= V:
        raise InfeasibleMoment(
            f"no Beta distribution has mean {m} and variance {V}: requires m(1-m) > V")
    s = m * (1.0 - m) / V - 1.0
    a, b = m * s, (1.0 - m) * s
    return _beta_like(a, b, f"var-beta:V={V:g},m={m:g}",
                      FamilyTag("var-beta", (("V", float(V)), ("m", float(m)),
                                             ("a", a), ("b", b))))


def restrict_normalize(prior: Prior, compact, spec: QuadSpec = DEFAULT_QUAD) -> Prior:
    """Renormalized restriction of a prior to a compact sub-interval/box."""
    if prior.dim == 1:
        lo, hi = _interval_arg(compact)
        (s_lo, s_hi), = prior.support
        if lo < s_lo or hi > s_hi:
            raise DomainError(
                f"compact [{lo}, {hi}] is not inside the support ({s_lo}, {s_hi})")
        try:
            log_z = log_integrate(lambda grid: density_on_grid(prior, grid), lo, hi,
                                  spec, grid_aware=True)
        except AllUnderflow:
            raise ZeroMass(f"prior {prior.prior_id!r} has no mass on [{lo}, {hi}]") from None
        if not np.isfinite(log_z) or log_z <= math.log(1e-300):
            raise ZeroMass(f"prior {prior.prior_id!r} has no mass on [{lo}, {hi}]")
        base_log_density = prior.log_density

        def log_density(theta):
            theta = np.asarray(theta, dtype=float)
            vals = np.asarray(base_log_density(theta), dtype=float) - log_z
            return np.where((theta >= lo) & (theta <= hi), vals, -np.inf)

        base_grid_fn = prior.log_density_grid
        log_density_grid = None
        if base_grid_fn is not None:
            def log_density_grid(grid: ThetaGrid):
                return np.asarray(base_grid_fn(grid), dtype=float) - log_z

        grid_fn = log_density_grid if log_density_grid is not None else (
            lambda grid: np.asarray(base_log_density(grid.theta), dtype=float) - log_z)
        sampler = _inverse_cdf_sampler(grid_fn, lo, hi)
        return Prior(
            prior_id=f"{prior.prior_id}|[{lo:g},{hi:g}]",
            support=((lo, hi),),
            log_density=log_density,
            normalized=True,
            family=FamilyTag("custom", (("origin", prior.prior_id), ("lo", lo), ("hi", hi))),
            log_norm_const=(prior.log_norm_const or 0.0) - log_z,
            sampler=sampler,
            log_density_grid=log_density_grid,
        )

    box = tuple((float(lo), float(hi)) for lo, hi in compact)
    if len(box) != prior.dim:
        raise DomainError("compact box dimension mismatch")
    for (lo, hi), (s_lo, s_hi) in zip(box, prior.support):
        if lo < s_lo or hi > s_hi:
            raise DomainError("compact box is not inside the support")
    if prior.dim != 2:
        raise DomainError("restriction is implemented for d = 1 and d = 2")
    base_log_density = prior.log_density

    def point_density(x, y):
        pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
        return np.exp(np.asarray(base_log_density(pts), dtype=float))

    z = integrate_2d(point_density, box, QUAD_2D)
    if z <= 1e-300:
        raise ZeroMass(f"prior {prior.prior_id!r} has no mass on {box}")
    log_z = math.log(z)

    def log_density2(theta):
        theta = np.asarray(theta, dtype=float)
        vals = np.asarray(base_log_density(theta), dtype=float) - log_z
        inside = np.ones(theta.shape[:-1], dtype=bool)
        for i, (lo, hi) in enumerate(box):
            inside &= (theta[..., i] >= lo) & (theta[..., i] <= hi)
        return np.where(inside, vals, -np.inf)

    return Prior(
        prior_id=f"{prior.prior_id}|box",
        support=box,
        log_density=log_density2,
        normalized=True,
        family=FamilyTag("custom", (("origin", prior.prior_id),)),
        log_norm_const=(prior.log_norm_const or 0.0) - log_z,
    )


def jeffreys_prior(model: StatModel, compact=None, spec: QuadSpec = DEFAULT_QUAD) -> Prior:
    """Prior proportional to sqrt(det Fisher), normalized on the region.

    ``compact`` defaults to the model's compact sub-box if set, otherwise to
    the full parameter box (which must then be bounded).
    """
    if compact is None:
        compact = model.param_space.compact or model.param_space.box
    if model.dim == 1:
        lo, hi = _interval_arg(compact)
        for (b_lo, b_hi) in model.param_space.box:
            if lo < b_lo or hi > b_hi:
                raise DomainError("jeffreys region exceeds the parameter box")
        if model.log_det_fisher_grid is not None:
            grid_logdet = model.log_det_fisher_grid
        else:
            def grid_logdet(grid: ThetaGrid):
                return np.array([
                    float(np.linalg.slogdet(fisher_information(model, t))[1])
                    for t in grid.theta])
        log_z = log_integrate(lambda grid: 0.5 * np.asarray(grid_logdet(grid), dtype=float),
                              lo, hi, spec, grid_aware=True, check_endpoints=True)

        if model.log_det_fisher is not None:
            plain_logdet = model.log_det_fisher
        else:
            def plain_logdet(theta):
                theta = np.atleast_1d(np.asarray(theta, dtype=float))
                return np.array([
                    float(np.linalg.slogdet(fisher_information(model, t))[1]) for t in theta])

        def log_density(theta):
            theta = np.asarray(theta, dtype=float)
            vals = 0.5 * np.asarray(plain_logdet(theta), dtype=float) - log_z
            return np.where((theta > lo) & (theta < hi), vals, -np.inf)

        def log_density_grid(grid: ThetaGrid):
            return 0.5 * np.asarray(grid_logdet(grid), dtype=float) - log_z

        return Prior(
            prior_id="jeffreys" if (lo, hi) == tuple(model.param_space.box[0]) else
            f"jeffreys|[{lo:g},{hi:g}]",
            support=((lo, hi),),
            log_density=log_density,
            normalized=True,
            family=FamilyTag("jeffreys", (("model", model.model_id), ("lo", lo), ("hi", hi))),
            log_norm_const=-log_z,
            sampler=_inverse_cdf_sampler(log_density_grid, lo, hi),
            log_density_grid=log_density_grid,
        )

    if model.dim != 2:
        raise DomainError("jeffreys_prior is implemented for d = 1 and d = 2")
    box = tuple((float(lo), float(hi)) for lo, hi in compact)

    def sqrt_det(x, y):
        xs, ys = np.broadcast_arrays(x, y)
        out = np.empty(xs.shape)
        for idx in np.ndindex(xs.shape):
            mat = fisher_information(model, np.array([xs[idx], ys[idx]]))
            out[idx] = math.sqrt(max(np.linalg.det(mat), 0.0))
        return out

    z = integrate_2d(sqrt_det, box, QUAD_2D)
    log_z = math.log(z)

    def log_density2(theta):
        theta = np.asarray(theta, dtype=float)
        flat = theta.reshape(-1, 2)
        vals = np.array([
            0.5 * float(np.linalg.slogdet(fisher_information(model, t))[1]) for t in flat])
        vals = vals.reshape(theta.shape[:-1]) - log_z
        inside = np.ones(theta.shape[:-1], dtype=bool)
        for i, (lo, hi) in enumerate(box):
            inside &= (theta[..., i] >= lo) & (theta[..., i] <= hi)
        return np.where(inside, vals, -np.inf)

    return Prior(
        prior_id="jeffreys",
        support=box,
        log_density=log_density2,
        normalized=True,
        family=FamilyTag("jeffreys", (("model", model.model_id),)),
        log_norm_const=-log_z,
    )


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------


def entropy_mc(prior: Prior, n_samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo differential entropy -E[log density] with its stderr."""
    require_normalized(prior, "entropy_mc")
    if prior.sampler is None:
        raise DomainError(f"prior {prior.prior_id!r} has no sampler for the MC entropy path")
    rng = rng_substream(seed, 0)
    draws = prior.sampler(rng, n_samples)
    vals = -np.asarray(prior.log_density(draws), dtype=float)
    mean = float(np.mean(vals))
    var = float(np.var(vals, ddof=1))
    if not (np.isfinite(mean) and np.isfinite(var)):
        raise EstimateDiverged("entropy Monte Carlo produced a non-finite mean or variance")
    return mean, math.sqrt(var / n_samples)


def prior_entropy(prior: Prior, n_samples: int = 100_000, seed: int = 0) -> float:
    """Differential entropy: Beta closed form when available, else Monte Carlo."""
    if prior.beta_params is not None:
        a, b = prior.beta_params
        return beta_entropy(a, b)
    if prior.family.kind == "uniform":
        return -(prior.log_norm_const or 0.0)
    return entropy_mc(prior, n_samples=n_samples, seed=seed)[0]


# ---------------------------------------------------------------------------
# config ids
# ---------------------------------------------------------------------------


def prior_from_id(text: str, model: StatModel | None = None, compact=None) -> Prior:
    """Resolve a config id such as "uniform", "beta:a=0.5,b=0.5", "jeffreys",
    "mean-beta:c=1.5,lambda=0.4" or "var-beta:V=0.1875,m=0.5".

    ``model``/``compact`` feed the ids that need them (jeffreys, uniform on a
    model box, restriction of any prior to a compact).
    """
    name, params = parse_id(text)
    prior: Prior
    if name == "uniform":
        reject_extras(params, text)
        if compact is not None:
            lo, hi = _interval_arg(compact)
            return uniform_prior(lo, hi)
        if model is not None:
            box = model.param_space.box
            if model.dim != 1 or not all(np.isfinite(v) for v in box[0]):
                raise DomainError(
                    "uniform prior needs a compact interval for this model")
            return uniform_prior(*box[0])
        return uniform_prior()
    if name == "beta":
        a = take_float(params, "a", text)
        b = take_float(params, "b", text)
        reject_extras(params, text)
        prior = beta_prior(a, b)
    elif name == "mean-beta":
        c = take_float(params, "c", text)
        lam = take_float(params, "lambda", text)
        reject_extras(params, text)
        prior = mean_constrained_beta(c, lam)
    elif name == "var-beta":
        V = take_float(params, "V", text)
        m = take_float(params, "m", text)
        reject_extras(params, text)
        prior = variance_constrained_beta(V, m)
    elif name == "jeffreys":
        reject_extras(params, text)
        if model is None:
            raise DomainError("the jeffreys prior id needs a model")
        return jeffreys_prior(model, compact)
    else:
        raise IdParseError(f"unknown prior id {text!r}")
    if compact is not None:
        prior = restrict_normalize(prior, compact)
    return prior
