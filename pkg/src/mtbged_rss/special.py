"""Digamma/trigamma kernels and the shape-dependent constants B, C, D, g.

Both polygamma functions shift the argument upward with the recurrence
psi(x) = psi(x + 1) - 1/x until it clears ``_ASYMPTOTIC_THRESHOLD`` and then
use the Bernoulli asymptotic series.  With the threshold at 10 and seven
series terms the truncation error is below 1e-17 relative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "AuxConstants",
    "aux_constants",
    "delta_1n",
    "delta_r",
    "digamma",
    "trigamma",
]

_ASYMPTOTIC_THRESHOLD = 10.0

# B_{2k} for k = 1..7
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def _check_positive(x: float, name: str = "x") -> float:
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise ValueError(f"{name} must be a positive finite real, got {x!r}")
    return x


def _shift(x: float, power: int) -> tuple[float, float]:
    """Return (x_shifted, sum of 1/x_i**power over the skipped points)."""
    terms = []
    while x < _ASYMPTOTIC_THRESHOLD:
        terms.append(1.0 / x**power)
        x += 1.0
    # smallest magnitudes first
    return x, math.fsum(reversed(terms))


def digamma(x: float) -> float:
    """Digamma function psi(x) for real x > 0."""
    x = _check_positive(x)
    x, correction = _shift(x, 1)
    inv2 = 1.0 / (x * x)
    series = 0.0
    p = inv2
    for k, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * k) * p
        p *= inv2
    return (math.log(x) - 0.5 / x - series) - correction


def trigamma(x: float) -> float:
    """Trigamma function psi'(x) for real x > 0."""
    x = _check_positive(x)
    x, correction = _shift(x, 2)
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    p = inv2 * inv
    for b in _BERNOULLI:
        series += b * p
        p *= inv2
    return (inv + 0.5 * inv2 + series) + correction


_PSI1 = -0.57721566490153286061  # psi(1)
_TRIGAMMA1 = math.pi**2 / 6.0  # psi'(1)


@dataclass(frozen=True)
class AuxConstants:
    """Shape-dependent constants of the generalized exponential marginal.

    ``B`` is the mean of the unit-rate marginal, ``C`` its variance,
    ``D = B(2a) - B(a)`` and ``g = D / sqrt(C)``.
    """

    alpha: float
    B: float
    C: float
    D: float
    g: float


def _b(alpha: float) -> float:
    return digamma(alpha + 1.0) - _PSI1


def _c(alpha: float) -> float:
    return _TRIGAMMA1 - trigamma(alpha + 1.0)


def aux_constants(alpha: float) -> AuxConstants:
    alpha = _check_positive(alpha, "alpha")
    b = _b(alpha)
    c = _c(alpha)
    d = _b(2.0 * alpha) - b
    return AuxConstants(alpha=alpha, B=b, C=c, D=d, g=d / math.sqrt(c))


def _check_n(n: int) -> int:
    if int(n) != n or n < 2:
        raise ValueError(f"set size n must be an integer >= 2, got {n!r}")
    return int(n)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not -1.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [-1, 1], got {lam!r}")
    return lam


def delta_r(n: int, r: int, lam: float) -> float:
    """Rank coefficient lambda*(n - 2r + 1)/(n + 1) of the rank-r concomitant."""
    n = _check_n(n)
    if int(r) != r or not 1 <= r <= n:
        raise ValueError(f"rank r must be an integer in 1..{n}, got {r!r}")
    lam = _check_lambda(lam)
    return lam * (n - 2 * int(r) + 1) / (n + 1)


def delta_1n(n: int, lam: float) -> float:
    """Interaction coefficient of the joint (min, max) concomitant density."""
    n = _check_n(n)
    lam = _check_lambda(lam)
    return lam * lam * (-n * n + n + 2) / ((n + 1) * (n + 2))
