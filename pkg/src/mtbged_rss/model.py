"""Morgenstern-type bivariate generalized exponential distribution.

X and Y have generalized exponential marginals F(t) = (1 - exp(-theta t))**alpha
and are coupled through the FGM copula C(u, v) = uv[1 + lam(1-u)(1-v)].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .special import aux_constants

__all__ = [
    "BivariatePair",
    "ModelParams",
    "correlation",
    "fgm_conditional_inverse",
    "joint_cdf",
    "joint_pdf",
    "marginal_cdf",
    "marginal_means",
    "marginal_pdf",
    "marginal_quantile",
    "sample_pair",
    "sample_pairs",
]

# below this |A| the conditional inverse uses its linear limit
LINEAR_BRANCH_TOL = 1e-12
LN2 = math.log(2.0)
_ONE_BELOW = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class ModelParams:
    alpha1: float
    alpha2: float
    theta1: float
    theta2: float
    lam: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "theta1", "theta2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not -1.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [-1, 1], got {self.lam!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BivariatePair:
    x: float
    y: float


def _positive(t, name):
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"{name} must be positive")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def marginal_cdf(alpha: float, theta: float, t):
    t = _positive(t, "t")
    return _out(np.power(-np.expm1(-theta * t), alpha))


def marginal_pdf(alpha: float, theta: float, t):
    t = _positive(t, "t")
    base = -np.expm1(-theta * t)
    return _out(alpha * theta * np.exp(-theta * t) * np.power(base, alpha - 1.0))


def marginal_quantile(alpha: float, theta: float, u):
    """Inverse of ``marginal_cdf``: -log(1 - u**(1/alpha)) / theta."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("u must lie strictly inside (0, 1)")
    # t = -log(1 - exp(s)) with s = log(u)/alpha, via the two-branch log1mexp
    s = np.log(u) / alpha
    with np.errstate(divide="ignore"):
        t = np.where(s < -LN2, -np.log1p(-np.exp(s)), -np.log(-np.expm1(s)))
    return _out(t / theta)


def joint_cdf(p: ModelParams, x, y):
    fx = marginal_cdf(p.alpha1, p.theta1, x)
    fy = marginal_cdf(p.alpha2, p.theta2, y)
    return _out(np.asarray(fx * fy * (1.0 + p.lam * (1.0 - fx) * (1.0 - fy))))


def joint_pdf(p: ModelParams, x, y):
    fx = np.asarray(marginal_cdf(p.alpha1, p.theta1, x))
    fy = np.asarray(marginal_cdf(p.alpha2, p.theta2, y))
    dens = marginal_pdf(p.alpha1, p.theta1, x) * marginal_pdf(p.alpha2, p.theta2, y)
    return _out(np.asarray(dens * (1.0 + p.lam * (2.0 * fx - 1.0) * (2.0 * fy - 1.0))))


def marginal_means(p: ModelParams) -> tuple[float, float]:
    return (
        aux_constants(p.alpha1).B / p.theta1,
        aux_constants(p.alpha2).B / p.theta2,
    )


def correlation(p: ModelParams) -> float:
    """Pearson correlation lam * g(alpha1) * g(alpha2)."""
    return p.lam * aux_constants(p.alpha1).g * aux_constants(p.alpha2).g


def fgm_conditional_inverse(a, w):
    """Solve v * (1 + a * (1 - v)) = w for v in [0, 1].

    ``a`` is the tilt of the conditional law; for the FGM copula given
    U = u it is lam * (1 - 2u).  Uses the cancellation-free form of the
    smaller quadratic root.
    """
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    a, w = np.broadcast_arrays(a, w)
    b = 1.0 + a
    disc = np.sqrt(np.maximum(b * b - 4.0 * a * w, 0.0))
    # 2w / (b + disc) equals (b - disc) / (2a) without the 0/0 near a = 0
    v = 2.0 * w / (b + disc)
    linear = np.abs(a) <= LINEAR_BRANCH_TOL
    if np.any(linear):
        v = np.where(linear, w, v)
    # sqrt(w) at a = -1 can round up to exactly 1.0
    return _out(np.minimum(v, _ONE_BELOW))


def _uniform_open(rng: np.random.Generator, size):
    u = rng.random(size)
    # Generator.random is on [0, 1); zero has probability 2**-53 per draw
    while np.any(u == 0.0):
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    return u


def copula_uniforms(lam: float, rng: np.random.Generator, size):
    """Draw (U, V) from the FGM copula by conditional inversion."""
    u = _uniform_open(rng, size)
    w = _uniform_open(rng, size)
    v = fgm_conditional_inverse(lam * (1.0 - 2.0 * u), w)
    return u, np.asarray(v)


def sample_pairs(p: ModelParams, rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
    u, v = copula_uniforms(p.lam, rng, size)
    return (
        np.asarray(marginal_quantile(p.alpha1, p.theta1, u)),
        np.asarray(marginal_quantile(p.alpha2, p.theta2, v)),
    )


def sample_pair(p: ModelParams, rng: np.random.Generator) -> BivariatePair:
    x, y = sample_pairs(p, rng, 1)
    return BivariatePair(float(x[0]), float(y[0]))
