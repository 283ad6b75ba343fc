"""Special functions needed by Beta normalizers, entropies and count likelihoods.

``math.lgamma`` covers the log-gamma; digamma is implemented with the usual
upward recurrence into the asymptotic regime (relative accuracy well below
1e-13 everywhere on (0, inf), far inside the 1e-12 target).
"""

from __future__ import annotations

import math

from .errors import DomainError

# Bernoulli-number coefficients B_{2n}/(2n) of the asymptotic digamma series.
_DIGAMMA_TAIL = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function for x > 0."""
    if not (x > 0.0):
        raise DomainError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    power = inv2
    for coeff in _DIGAMMA_TAIL:
        tail += coeff * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - tail


def log_beta(a: float, b: float) -> float:
    """ln B(a, b) for a, b > 0."""
    if not (a > 0.0 and b > 0.0):
        raise DomainError(f"log_beta requires positive arguments, got ({a}, {b})")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def log_binom(n: int, k: int) -> float:
    """ln C(n, k) for integers 0 <= k <= n."""
    if k < 0 or k > n:
        raise DomainError(f"log_binom requires 0 <= k <= n, got n={n}, k={k}")
    return math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)


def beta_entropy(a: float, b: float) -> float:
    """Differential entropy of Beta(a, b) in nats."""
    return (
        log_beta(a, b)
        - (a - 1.0) * digamma(a)
        - (b - 1.0) * digamma(b)
        + (a + b - 2.0) * digamma(a + b)
    )
