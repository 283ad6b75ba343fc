"""Generators f of f-divergences, their small-x profiles, and condition checks.

A generator carries three evaluation paths:

* ``eval(x)`` for plain arguments,
* ``eval_log(log_x)`` for arguments only available in log space,
* ``eval_log_weighted(log_w, log_x)`` returning exp(log_w) * f(exp(log_x))
  without ever forming the (possibly enormous or vanishing) ratio. The
  estimators rely on this path: likelihood-weighted sums stay bounded even
  when log ratios reach hundreds.

The ``profile`` records the expansion f(x) = shift + coeff * x^exponent
+ o(x^exponent) near zero; the limit machinery always works with the
shift-corrected generator f - shift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ChiSquareBoundary, DomainError, IdParseError
from .ids import parse_id, reject_extras, take_float

__all__ = [
    "AsymptoticProfile",
    "DivergenceGen",
    "TheoremReport",
    "alpha_divergence",
    "power_divergence",
    "kl_generator",
    "validate_theorem_conditions",
    "divergence_from_id",
]


@dataclass(frozen=True)
class AsymptoticProfile:
    """Small-x behavior f(x) = shift + coeff * x^exponent + o(x^exponent)."""

    coeff: float
    exponent: float
    shift: float

    def __post_init__(self) -> None:
        if self.exponent == -1.0:
            raise ChiSquareBoundary(
                "exponent -1 (chi-square divergence) is excluded: it sits on the "
                "boundary of both asymptotic regimes")
        if not (-1.0 < self.exponent < 1.0) or self.exponent == 0.0:
            raise DomainError(
                f"profile exponent must lie in (-1, 0) or (0, 1), got {self.exponent}")
        if self.coeff == 0.0:
            raise DomainError("profile coefficient must be nonzero")


@dataclass(frozen=True)
class DivergenceGen:
    """An f-divergence generator with stable evaluation paths.

    ``linear_coeff`` is the exact coefficient of the x-component of f, when f
    decomposes as (sub-linear part) + linear_coeff * x. Because the ratio
    marginal/likelihood has expectation exactly one under the likelihood, the
    linear component contributes exactly ``linear_coeff`` to every mutual
    information regardless of k: it acts as an additive constant. The Monte
    Carlo estimators integrate it analytically (a perfect control variate:
    the raw f-average has importance-weight-type tails) and the convergence
    scaling subtracts it together with the profile shift.
    """

    name: str
    profile: AsymptoticProfile | None
    _fn: Callable[[np.ndarray], np.ndarray]
    _log_fn: Callable[[np.ndarray], np.ndarray]
    _weighted_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    linear_coeff: float = 0.0
    _sublinear_log_fn: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def offset(self) -> float:
        """The k-independent additive part of the mutual information:
        profile shift plus the exact linear coefficient."""
        shift = self.profile.shift if self.profile is not None else 0.0
        return shift + self.linear_coeff

    def eval_log_sublinear(self, log_x):
        """f(exp(log_x)) - linear_coeff * exp(log_x), computed without
        cancellation (the Monte Carlo integrand)."""
        log_x = np.asarray(log_x, dtype=float)
        if self._sublinear_log_fn is not None:
            out = self._sublinear_log_fn(log_x)
        elif self.linear_coeff == 0.0:
            out = self._log_fn(log_x)
        else:
            out = self._log_fn(log_x) - self.linear_coeff * np.exp(log_x)
        return float(out) if np.ndim(out) == 0 else out

    def eval(self, x):
        """f(x) for x > 0 (vectorized)."""
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise DomainError("generator argument must be positive")
        out = self._fn(x)
        return float(out) if np.isscalar(x) or out.ndim == 0 else out

    def eval_log(self, log_x):
        """f(exp(log_x)) evaluated from the log argument."""
        log_x = np.asarray(log_x, dtype=float)
        out = self._log_fn(log_x)
        return float(out) if out.ndim == 0 else out

    def eval_log_weighted(self, log_w, log_x):
        """exp(log_w) * f(exp(log_x)), stable for extreme log values."""
        log_w = np.asarray(log_w, dtype=float)
        log_x = np.asarray(log_x, dtype=float)
        if self._weighted_fn is not None:
            return self._weighted_fn(log_w, log_x)
        with np.errstate(over="ignore"):
            return np.exp(log_w) * self._log_fn(log_x)

    def shifted(self) -> "DivergenceGen":
        """The generator f - shift (profile shift removed)."""
        if self.profile is None or self.profile.shift == 0.0:
            return self
        gamma = self.profile.shift
        base_fn, base_log, base_w = self._fn, self._log_fn, self._weighted_fn
        base_sub = self._sublinear_log_fn

        def w_fn(log_w, log_x):
            inner = base_w(log_w, log_x) if base_w is not None else \
                np.exp(log_w) * base_log(log_x)
            return inner - gamma * np.exp(log_w)

        return DivergenceGen(
            name=f"{self.name}-shifted",
            profile=AsymptoticProfile(self.profile.coeff, self.profile.exponent, 0.0),
            _fn=lambda x: base_fn(x) - gamma,
            _log_fn=lambda lx: base_log(lx) - gamma,
            _weighted_fn=w_fn,
            linear_coeff=self.linear_coeff,
            _sublinear_log_fn=None if base_sub is None else (lambda lx: base_sub(lx) - gamma),
        )


def alpha_divergence(a: float) -> DivergenceGen:
    """The alpha-divergence generator (x^a - a x - (1-a)) / (a(a-1)), a in (0,1).

    Exactly a three-power-term function, so the weighted path is a sum of
    three stable exponentials. Profile: coeff 1/(a(a-1)) < 0, exponent a,
    shift 1/a.
    """
    if not (0.0 < a < 1.0):
        raise DomainError(f"alpha_divergence needs a strictly inside (0, 1), got {a}")
    a = float(a)
    denom = a * (a - 1.0)
    coeff = 1.0 / denom          # negative
    lin = 1.0 / (1.0 - a)        # the exact x-term: f = shift + coeff x^a + lin x
    shift = 1.0 / a

    def fn(x):
        return (np.power(x, a) - a * x - (1.0 - a)) / denom

    def log_fn(lx):
        with np.errstate(over="ignore"):
            return shift + coeff * np.exp(a * lx) + lin * np.exp(lx)

    def weighted(log_w, log_x):
        with np.errstate(over="ignore"):
            return (shift * np.exp(log_w)
                    + coeff * np.exp(log_w + a * log_x)
                    + lin * np.exp(log_w + log_x))

    def sublinear(lx):
        return shift + coeff * np.exp(a * lx)

    return DivergenceGen(
        name=f"alpha:a={a:g}",
        profile=AsymptoticProfile(coeff=coeff, exponent=a, shift=shift),
        _fn=fn,
        _log_fn=log_fn,
        _weighted_fn=weighted,
        linear_coeff=lin,
        _sublinear_log_fn=sublinear,
    )


def power_divergence(coeff: float, beta: float) -> DivergenceGen:
    """The pure-power generator f(x) = coeff * x^beta with beta in (-1, 0)."""
    if beta == -1.0:
        raise ChiSquareBoundary(
            "beta = -1 is the chi-square boundary case and is rejected: both "
            "asymptotic regimes exclude it")
    if not (-1.0 < beta < 0.0):
        raise DomainError(f"power_divergence needs beta in (-1, 0), got {beta}")
    if coeff == 0.0:
        raise DomainError("power_divergence needs a nonzero coefficient")
    coeff = float(coeff)
    beta = float(beta)

    def fn(x):
        return coeff * np.power(x, beta)

    def log_fn(lx):
        with np.errstate(over="ignore"):
            return coeff * np.exp(beta * lx)

    def weighted(log_w, log_x):
        with np.errstate(over="ignore"):
            return coeff * np.exp(log_w + beta * log_x)

    return DivergenceGen(
        name=f"power:coeff={coeff:g},beta={beta:g}",
        profile=AsymptoticProfile(coeff=coeff, exponent=beta, shift=0.0),
        _fn=fn,
        _log_fn=log_fn,
        _weighted_fn=weighted,
    )


def kl_generator() -> DivergenceGen:
    """f(x) = -log x: the Kullback-Leibler case. No power profile applies."""

    def weighted(log_w, log_x):
        return -log_x * np.exp(log_w)

    return DivergenceGen(
        name="kl",
        profile=None,
        _fn=lambda x: -np.log(x),
        _log_fn=lambda lx: -np.asarray(lx, dtype=float),
        _weighted_fn=weighted,
    )


@dataclass(frozen=True)
class TheoremReport:
    """Numeric verdicts on the asymptotic-regime hypotheses for a generator.

    ``branch`` is "positive-exponent" for exponent in (0, 1) and
    "negative-exponent" for (-1, 0);
    ``coeff_sign_ok`` is the Jeffreys-optimality sign condition of that
    branch (coeff < 0, respectively coeff (exponent+1) > 0).
    """

    name: str
    branch: str
    exponent_in_range: bool
    coeff_sign_ok: bool
    linear_growth_ok: bool
    local_bounded_ok: bool

    @property
    def all_ok(self) -> bool:
        return (self.exponent_in_range and self.coeff_sign_ok
                and self.linear_growth_ok and self.local_bounded_ok)


def validate_theorem_conditions(gen: DivergenceGen) -> TheoremReport:
    """Grid-check the growth/boundedness conditions and the sign conditions."""
    if gen.profile is None:
        raise DomainError(
            f"generator {gen.name!r} has no small-x profile; the asymptotic "
            "conditions do not apply")
    prof = gen.profile
    if 0.0 < prof.exponent < 1.0:
        branch = "positive-exponent"
        coeff_ok = prof.coeff < 0.0
    else:
        branch = "negative-exponent"
        coeff_ok = prof.coeff * (prof.exponent + 1.0) > 0.0
    exponent_ok = (-1.0 < prof.exponent < 1.0) and prof.exponent != 0.0

    x_big = np.logspace(0.0, 8.0, 33)
    vals_big = gen.eval(x_big)
    ratios = np.abs(vals_big) / x_big
    # f(x) = O(x): the |f|/x ratios over the last decades must not keep growing
    growth_ok = bool(np.all(np.isfinite(ratios))
                     and ratios[-1] <= 1.5 * ratios[len(ratios) // 2] + 1e-12)

    x_all = np.logspace(-8.0, 8.0, 65)
    vals_all = gen.eval(x_all)
    bounded_ok = bool(np.all(np.isfinite(vals_all)))

    return TheoremReport(
        name=gen.name,
        branch=branch,
        exponent_in_range=exponent_ok,
        coeff_sign_ok=coeff_ok,
        linear_growth_ok=growth_ok,
        local_bounded_ok=bounded_ok,
    )


def divergence_from_id(text: str) -> DivergenceGen:
    """Resolve "alpha:a=0.5", "power:coeff=1,beta=-0.5" or "kl"."""
    name, params = parse_id(text)
    if name == "alpha":
        a = take_float(params, "a", text)
        reject_extras(params, text)
        return alpha_divergence(a)
    if name == "power":
        coeff = take_float(params, "coeff", text)
        beta = take_float(params, "beta", text)
        reject_extras(params, text)
        return power_divergence(coeff, beta)
    if name == "kl":
        reject_extras(params, text)
        return kl_generator()
    raise IdParseError(f"unknown divergence id {text!r}")
