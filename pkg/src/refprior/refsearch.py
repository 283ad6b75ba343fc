"""Maximizing the limit functional over one-parameter prior families.

The search grids the family parameter, keeps every strict local maximum,
refines each by golden-section, and certifies it against the refined
objective. Multiple maximizers are surfaced (constrained classes need not be
convex, so uniqueness is not guaranteed); the entropy rule picks among them.
Infeasible parameter spans (divergent limit integrals) are recorded, not
raised, unless the whole grid is infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .asymptotics import limit_functional, limit_functional_beta_bernoulli
from .divergences import DivergenceGen
from .errors import (
    DomainError,
    IdParseError,
    InfeasibleMoment,
    IntegrabilityError,
    NoFeasiblePoint,
    ZeroMass,
)
from .ids import parse_id, reject_extras, take_float
from .models import StatModel
from .priors import Prior, mean_constrained_beta, prior_entropy, variance_constrained_beta
from .quadrature import DEFAULT_QUAD, QuadSpec

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FEASIBILITY_ERRORS = (IntegrabilityError, InfeasibleMoment, DomainError, ZeroMass)


@dataclass(frozen=True)
class PriorFamily:
    """A one-parameter family of priors over a closed parameter interval."""

    family_id: str
    param_range: tuple[float, float]
    make: Callable[[float], Prior]
    constraint: str  # "mean-beta" | "var-beta" | "constant" | "custom-1d"

    def __post_init__(self) -> None:
        lo, hi = self.param_range
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise DomainError(f"bad family parameter range ({lo}, {hi})")


def mean_beta_family(c: float, param_range: tuple[float, float] = (0.01, 20.0)) -> PriorFamily:
    """Beta priors with mean fixed at 1/c, indexed by the first shape."""
    if not c > 1.0:
        raise DomainError(f"mean_beta_family needs c > 1, got {c}")
    return PriorFamily(
        family_id=f"mean-beta:c={c:g}",
        param_range=(float(param_range[0]), float(param_range[1])),
        make=lambda lam: mean_constrained_beta(c, lam),
        constraint="mean-beta",
    )


def var_beta_family(V: float, param_range: tuple[float, float] | None = None,
                    inset: float = 1e-4) -> PriorFamily:
    """Beta priors with variance fixed at V, indexed by their mean."""
    if not (0.0 < V < 0.25):
        raise DomainError(f"var_beta_family needs V in (0, 1/4), got {V}")
    if param_range is None:
        half = math.sqrt(0.25 - V)
        param_range = (0.5 - half + inset, 0.5 + half - inset)
    return PriorFamily(
        family_id=f"var-beta:V={V:g}",
        param_range=(float(param_range[0]), float(param_range[1])),
        make=lambda m: variance_constrained_beta(V, m),
        constraint="var-beta",
    )


def constant_family(prior: Prior) -> PriorFamily:
    """A degenerate single-member family (every parameter maps to ``prior``)."""
    return PriorFamily(
        family_id=f"constant:{prior.prior_id}",
        param_range=(0.0, 1.0),
        make=lambda _lam: prior,
        constraint="constant",
    )


def family_from_id(text: str, param_range: tuple[float, float] | None = None) -> PriorFamily:
    """Resolve "mean-beta:c=1.5" or "var-beta:V=0.1875" into a family."""
    name, params = parse_id(text)
    if name == "mean-beta":
        c = take_float(params, "c", text)
        reject_extras(params, text)
        return mean_beta_family(c, param_range or (0.01, 20.0))
    if name == "var-beta":
        V = take_float(params, "V", text)
        reject_extras(params, text)
        return var_beta_family(V, param_range)
    raise IdParseError(f"unknown family id {text!r}")


def family_objective(family: PriorFamily, model: StatModel, gen: DivergenceGen,
                     spec: QuadSpec = DEFAULT_QUAD) -> Callable[[float], float]:
    """The map lambda -> l(make(lambda)); closed form on Beta-Bernoulli."""
    if gen.profile is None:
        raise DomainError(f"generator {gen.name!r} has no profile; nothing to maximize")
    beta = gen.profile.exponent
    coeff = gen.profile.coeff

    def objective(lam: float) -> float:
        prior = family.make(lam)
        if prior.beta_params is not None and model.model_id == "bernoulli":
            a, b = prior.beta_params
            return limit_functional_beta_bernoulli(a, b, beta, coeff)
        return limit_functional(model, prior, gen, spec)

    return objective


@dataclass(frozen=True)
class SearchPoint:
    """One refined maximizer of the family objective."""

    lam: float
    l_value: float
    entropy: float
    certified: bool
    is_global: bool


@dataclass(frozen=True)
class SearchResult:
    """All maximizers found over a family, sorted by parameter value."""

    family: PriorFamily = field(repr=False)
    maximizers: tuple[SearchPoint, ...]
    selected: int
    grid_size: int
    refine_tol: float
    infeasible_ranges: tuple[tuple[float, float], ...]


def _golden_max(fn: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fn(x1)
    return 0.5 * (a + b)


def maximize_over_family(family: PriorFamily, model: StatModel, gen: DivergenceGen,
                         grid_n: int = 2048, refine_tol: float = 1e-8,
                         spec: QuadSpec = DEFAULT_QUAD) -> SearchResult:
    """Grid, refine and certify every strict local maximum of the objective.

    Maximizers within 1e-6 |l_max| of the best are flagged global; the
    selected index follows the maximal-entropy rule with ties broken toward
    the smaller parameter.
    """
    if grid_n < 8:
        raise DomainError("grid_n must be at least 8")
    objective = family_objective(family, model, gen, spec)
    lo, hi = family.param_range
    grid = np.linspace(lo, hi, grid_n)
    values = np.full(grid_n, np.nan)
    for i, lam in enumerate(grid):
        try:
            values[i] = objective(float(lam))
        except _FEASIBILITY_ERRORS:
            continue
    feasible = np.isfinite(values)
    if not feasible.any():
        raise NoFeasiblePoint(
            f"every grid point of family {family.family_id!r} has a divergent or "
            "undefined objective")

    # contiguous infeasible spans, reported by their grid extent
    infeasible_ranges: list[tuple[float, float]] = []
    i = 0
    while i < grid_n:
        if not feasible[i]:
            j = i
            while j + 1 < grid_n and not feasible[j + 1]:
                j += 1
            infeasible_ranges.append((float(grid[i]), float(grid[j])))
            i = j + 1
        else:
            i += 1

    def guarded(lam: float) -> float:
        try:
            return objective(float(lam))
        except _FEASIBILITY_ERRORS:
            return -math.inf

    refined: list[tuple[float, float]] = []
    boundary_fallback = False
    if family.constraint == "constant":
        refined.append((0.5 * (lo + hi), values[feasible][0]))
    else:
        for i in range(1, grid_n - 1):
            if not (feasible[i - 1] and feasible[i] and feasible[i + 1]):
                continue
            up = values[i] - values[i - 1]
            down = values[i] - values[i + 1]
            # strict local max, allowing an exact two-point tie at the top
            # (symmetric objectives on symmetric grids produce those)
            if min(up, down) >= 0.0 and max(up, down) > 0.0:
                lam_star = _golden_max(guarded, float(grid[i - 1]), float(grid[i + 1]),
                                       refine_tol)
                refined.append((lam_star, guarded(lam_star)))
    if not refined:
        # objective is monotone on every feasible span: fall back to the best
        # grid point so callers still get the family optimum (not certified)
        boundary_fallback = True
        best = int(np.nanargmax(values))
        refined.append((float(grid[best]), float(values[best])))

    # deduplicate refinements that converged to the same point
    refined.sort()
    merged: list[tuple[float, float]] = []
    for lam, val in refined:
        if merged and abs(lam - merged[-1][0]) <= 10.0 * refine_tol:
            if val > merged[-1][1]:
                merged[-1] = (lam, val)
            continue
        merged.append((lam, val))

    l_max = max(val for _, val in merged)
    points = []
    for lam, val in merged:
        step = 10.0 * refine_tol * max(1.0, abs(lam))
        certified = not boundary_fallback
        for probe in (lam - step, lam + step):
            if lo < probe < hi and guarded(probe) > val:
                certified = False
        entropy = prior_entropy(family.make(lam))
        points.append(SearchPoint(
            lam=float(lam), l_value=float(val), entropy=float(entropy),
            certified=certified, is_global=val >= l_max - 1e-6 * abs(l_max)))

    best_entropy = max(p.entropy for p in points)
    selected = next(i for i, p in enumerate(points) if p.entropy >= best_entropy - 1e-10)
    return SearchResult(
        family=family,
        maximizers=tuple(points),
        selected=selected,
        grid_size=grid_n,
        refine_tol=refine_tol,
        infeasible_ranges=tuple(infeasible_ranges),
    )


def select_by_entropy(result: SearchResult) -> Prior:
    """The maximizer with the largest differential entropy (ties: smaller
    parameter, which is how the maximizers are ordered)."""
    if not result.maximizers:
        raise NoFeasiblePoint("search result carries no maximizers")
    return result.family.make(result.maximizers[result.selected].lam)


@dataclass(frozen=True)
class VerifyReport:
    """Probe-based check that a candidate dominates its family in l."""

    candidate_id: str
    l_candidate: float
    n_probe: int
    violations: tuple[tuple[float, float], ...]  # (lambda, l_value) exceeding candidate
    max_shortfall: float

    @property
    def is_reference(self) -> bool:
        return not self.violations


def verify_reference(candidate: Prior, family: PriorFamily, model: StatModel,
                     gen: DivergenceGen, n_probe: int = 64, tol: float = 1e-8,
                     spec: QuadSpec = DEFAULT_QUAD) -> VerifyReport:
    """Check l(candidate) >= l(member) - tol across a probe grid of a family."""
    objective = family_objective(family, model, gen, spec)
    l_cand = limit_functional(model, candidate, gen, spec)
    lo, hi = family.param_range
    probes = np.linspace(lo, hi, n_probe)
    violations = []
    max_shortfall = 0.0
    for lam in probes:
        try:
            val = objective(float(lam))
        except _FEASIBILITY_ERRORS:
            continue
        if val > l_cand + tol:
            violations.append((float(lam), float(val)))
            max_shortfall = max(max_shortfall, val - l_cand)
    return VerifyReport(
        candidate_id=candidate.prior_id,
        l_candidate=float(l_cand),
        n_probe=int(n_probe),
        violations=tuple(violations),
        max_shortfall=float(max_shortfall),
    )
