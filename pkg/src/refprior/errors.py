"""Semantic exception hierarchy shared across the package.

Public numeric routines never raise bare ``ValueError``/``ArithmeticError``;
they raise one of the classes below so callers (and the CLI exit-code logic)
can route failures without string matching.
"""


class RefPriorError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RefPriorError, ValueError):
    """An argument lies outside its mathematical domain."""


class NonFiniteLogLik(RefPriorError, ArithmeticError):
    """A log-likelihood term evaluated to NaN or +inf."""


class NotPositiveDefinite(RefPriorError):
    """A Fisher information matrix has an eigenvalue at or below tolerance."""


class QuadratureFailure(RefPriorError, ArithmeticError):
    """Adaptive refinement exhausted its budget without reaching tolerance."""


class AllUnderflow(QuadratureFailure):
    """Every quadrature node underflowed even in log space (defensive)."""


class IntegrabilityError(RefPriorError, ArithmeticError):
    """The integrand diverges: refinement grows without stabilizing, or a
    closed-form exponent condition is violated."""


class EstimateDiverged(RefPriorError, ArithmeticError):
    """A Monte Carlo running mean exceeded its divergence guard."""


class NonFiniteValue(RefPriorError, ArithmeticError):
    """A divergence evaluation produced a non-finite sample."""


class ZeroMass(RefPriorError):
    """A prior carries (numerically) zero mass on the requested region."""


class InfeasibleMoment(RefPriorError, ValueError):
    """No member of the distribution family has the requested moments."""


class NormalizationError(RefPriorError):
    """An operation requiring a normalized prior received an unnormalized one."""


class ChiSquareBoundary(DomainError):
    """The exponent -1 (chi-square case) is outside both asymptotic regimes
    and is rejected explicitly rather than silently misbehaving."""


class NoFeasiblePoint(RefPriorError):
    """Every grid point of a prior-family search was infeasible."""


class IdParseError(RefPriorError, ValueError):
    """A string id ("beta:a=0.5,b=0.5", ...) does not match the id grammar."""


class ConfigParseError(RefPriorError, ValueError):
    """An experiment config failed validation; ``errors`` lists all problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConditionsNotMet(UserWarning):
    """Warning category: a Jeffreys-optimality gap was computed but the
    generator's sign/exponent conditions do not certify it."""
