"""Distributions of concomitants of order statistics under the MTBGED.

Every single-unit concomitant law in this package has the density

    h(y) = f(y) * [1 + d * (1 - 2 F(y))]

with f, F the generalized exponential marginal of Y, and differs only in the
tilt ``d``: the rank-r concomitant of a set of size n has d = delta_r, the
concomitant of the maximum of N pairs has d = -lam (N - 1)/(N + 1) and the
steady-state limit has d = -lam.

Moments.  Writing B, C, D for the constants of alpha2 and C2 = C(2 alpha2),
the exact moments of the tilted law are

    mean     = (B - d D) / theta2
    variance = (C + d (C - C2 - D**2) - d**2 D**2) / theta2**2

(the second moment uses that the maximum of two GE(alpha) variables is
GE(2 alpha)).  The variance usually quoted for these laws,
(C + d (C2 - C)) / theta2**2, does not follow from the density; it is kept
as ``published_variance`` because the published variances and efficiency
tables are built on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import ModelParams
from .special import aux_constants, delta_1n, delta_r

__all__ = [
    "ConcomitantLaw",
    "concomitant_cdf_inverse",
    "concomitant_moments",
    "joint_minmax_pdf",
    "max_tilt",
    "minmax_covariance",
    "published_variance",
    "msrss_moments",
    "stage_ratio",
    "steady_state_moments",
]


@dataclass(frozen=True)
class ConcomitantLaw:
    alpha2: float
    theta2: float
    d: float

    def __post_init__(self):
        if not (self.alpha2 > 0 and self.theta2 > 0):
            raise ValueError("alpha2 and theta2 must be positive")
        if not -1.0 <= self.d <= 1.0:
            raise ValueError(f"tilt d must lie in [-1, 1], got {self.d!r}")

    @classmethod
    def for_rank(cls, alpha2: float, theta2: float, n: int, r: int, lam: float) -> ConcomitantLaw:
        return cls(alpha2, theta2, delta_r(n, r, lam))

    @classmethod
    def for_maximum(cls, alpha2: float, theta2: float, n: int, l: int, lam: float) -> ConcomitantLaw:
        """Concomitant of the largest X among n**l pairs (the MSRSS unit)."""
        return cls(alpha2, theta2, max_tilt(n, l, lam))

    @classmethod
    def steady_state(cls, alpha2: float, theta2: float, lam: float) -> ConcomitantLaw:
        return cls(alpha2, theta2, -lam)

    def pdf(self, y):
        v = np.asarray(model.marginal_cdf(self.alpha2, self.theta2, y))
        f = np.asarray(model.marginal_pdf(self.alpha2, self.theta2, y))
        return model._out(f * (1.0 + self.d * (1.0 - 2.0 * v)))

    def cdf(self, y):
        v = np.asarray(model.marginal_cdf(self.alpha2, self.theta2, y))
        return model._out(v + self.d * v * (1.0 - v))

    def ppf(self, u):
        return concomitant_cdf_inverse(self, u)

    def rvs(self, rng: np.random.Generator, size=None):
        u = model._uniform_open(rng, size if size is not None else 1)
        out = np.asarray(self.ppf(u))
        return float(out[0]) if size is None else out

    def moments(self) -> tuple[float, float]:
        return concomitant_moments(self)


def concomitant_moments(law: ConcomitantLaw) -> tuple[float, float]:
    """Exact mean and variance of a tilted concomitant law."""
    a = aux_constants(law.alpha2)
    c2 = aux_constants(2.0 * law.alpha2).C
    d = law.d
    mean = (a.B - d * a.D) / law.theta2
    var = (a.C + d * (a.C - c2 - a.D**2) - d * d * a.D**2) / law.theta2**2
    return mean, var


def published_variance(law: ConcomitantLaw) -> float:
    """The literature's closed-form variance (C + d (C2 - C)) / theta2**2.

    Not the variance of ``law``; see the module docstring.
    """
    a = aux_constants(law.alpha2)
    c2 = aux_constants(2.0 * law.alpha2).C
    return (a.C + law.d * (c2 - a.C)) / law.theta2**2


def concomitant_cdf_inverse(law: ConcomitantLaw, u):
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("u must lie strictly inside (0, 1)")
    # v + d v (1 - v) = u is the copula conditional equation with a = d
    v = model.fgm_conditional_inverse(law.d, u)
    return model.marginal_quantile(law.alpha2, law.theta2, v)


def stage_ratio(n: int, l: int) -> float:
    """(n**l - 1)/(n**l + 1), saturating to 1.0 once the gap is below rounding."""
    if int(n) != n or n < 2:
        raise ValueError(f"set size n must be an integer >= 2, got {n!r}")
    if int(l) != l or l < 1:
        raise ValueError(f"stage count l must be an integer >= 1, got {l!r}")
    if l * math.log2(n) > 60:
        return 1.0
    big = int(n) ** int(l)
    return 1.0 - 2.0 / (big + 1)


def max_tilt(n: int, l: int, lam: float) -> float:
    return -lam * stage_ratio(n, l)


def msrss_moments(p: ModelParams, n: int, l: int) -> tuple[float, float]:
    """Return the published (xi, gamma) of an l-stage maximum concomitant.

    The mean is exactly mu_y * xi.  gamma / theta2**2 is the published
    variance; the exact one is ``ConcomitantLaw.for_maximum(...).moments()[1]``.
    """
    a = aux_constants(p.alpha2)
    c2 = aux_constants(2.0 * p.alpha2).C
    t = p.lam * stage_ratio(n, l)
    return 1.0 + t * a.D / a.B, a.C + t * (a.C - c2)


def steady_state_moments(p: ModelParams) -> tuple[float, float]:
    """Return the published (Z, I), the l -> infinity limit of ``msrss_moments``."""
    a = aux_constants(p.alpha2)
    c2 = aux_constants(2.0 * p.alpha2).C
    return 1.0 + p.lam * a.D / a.B, a.C + p.lam * (a.C - c2)


def joint_minmax_pdf(p: ModelParams, n: int, z, w):
    """Joint density of the concomitants of the minimum (z) and maximum (w) of one set."""
    fz = np.asarray(model.marginal_pdf(p.alpha2, p.theta2, z))
    fw = np.asarray(model.marginal_pdf(p.alpha2, p.theta2, w))
    vz = np.asarray(model.marginal_cdf(p.alpha2, p.theta2, z))
    vw = np.asarray(model.marginal_cdf(p.alpha2, p.theta2, w))
    c = 2.0 * p.lam * (n - 1) / (n + 1)
    k = delta_1n(n, p.lam)
    factor = 1.0 + c * (vw - vz) + k * (1.0 - 2.0 * vw) * (1.0 - 2.0 * vz)
    return model._out(fz * fw * factor)


def minmax_covariance(p: ModelParams, n: int) -> float:
    """Cov of the min and max concomitants drawn from the same set."""
    if int(n) != n or n < 2:
        raise ValueError(f"set size n must be an integer >= 2, got {n!r}")
    d = aux_constants(p.alpha2).D
    return 4.0 * p.lam**2 * d**2 / ((n + 1) ** 2 * (n + 2) * p.theta2**2)
