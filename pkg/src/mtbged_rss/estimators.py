"""Unbiased estimators of the study-variate mean mu_y and their variances.

Every mu_y estimator here is linear in the measured values, so each one is
represented by a weight vector aligned with ``SchemeSpec.layout()`` plus the
closed-form variance.  ``estimator_weights`` exposes that pair so the Monte
Carlo harness can apply an estimator to a whole batch at once.

``closed_form_variance`` is the published variance of each estimator.
Those closed forms inherit the published concomitant variance, which is not
the variance of the concomitant law (see ``concomitants``); the true
variance is available as ``exact_variance`` whenever lambda is known.  When
theta2 is not supplied, variances are reported for theta2 = 1, i.e. in units
of 1/theta2**2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .concomitants import concomitant_moments, minmax_covariance, msrss_moments, steady_state_moments
from .model import ModelParams
from .schemes import UNBALANCED, RankedSample, SchemeSpec
from .special import aux_constants, delta_r

__all__ = [
    "BlueCoefficients",
    "ESTIMATORS",
    "EstimateResult",
    "blue_coefficients",
    "default_estimator",
    "est_blue",
    "est_crss",
    "est_erss",
    "est_lambda",
    "est_lrss",
    "est_merss",
    "est_msrss",
    "est_rss",
    "est_ussrss",
    "estimate",
    "estimator_weights",
    "exact_variance",
]

# estimator id -> scheme kinds it accepts
ESTIMATORS = {
    "rss": ("rss",),
    "blue": ("rss",),
    "crss": ("crss",),
    "lrss": ("lrss",),
    "erss1": ("erss1",),
    "erss2": ("erss2",),
    "erss3": ("erss3",),
    "merss": ("merss",),
    "urss": ("urss",),
    "msrss": ("msrss", "urss"),
    "ussrss": ("ussrss",),
}

NEEDS_LAMBDA = frozenset({"blue", "crss", "erss2", "urss", "msrss", "ussrss"})


@dataclass(frozen=True)
class EstimateResult:
    estimator_id: str
    point: float
    closed_form_variance: float
    scheme: SchemeSpec
    params_used: dict = field(default_factory=dict)
    exact_variance: float | None = None

    def to_dict(self, digits: int | None = None) -> dict:
        fmt = (lambda v: v) if digits is None else (lambda v: float(f"{v:.{digits}g}"))
        return {
            "estimator_id": self.estimator_id,
            "point": fmt(self.point),
            "variance": fmt(self.closed_form_variance),
            "exact_variance": None if self.exact_variance is None else fmt(self.exact_variance),
            "n": self.scheme.n,
            "params": self.params_used,
            "scheme": self.scheme.to_dict(),
        }

    def to_json(self, digits: int | None = None) -> str:
        return json.dumps(self.to_dict(digits), indent=2)


@dataclass(frozen=True)
class BlueCoefficients:
    a: np.ndarray
    H: np.ndarray
    W: np.ndarray
    v2: float


def blue_coefficients(n: int, alpha2: float, lam: float) -> BlueCoefficients:
    """Weights of the best linear unbiased estimator from one RSS cycle."""
    a_ = aux_constants(alpha2)
    c2 = aux_constants(2.0 * alpha2).C
    delta = np.array([delta_r(n, r, lam) for r in range(1, n + 1)])
    H = 1.0 - delta * a_.D / a_.B
    W = a_.C + delta * (c2 - a_.C)
    v2 = 1.0 / math.fsum(H * H / W)
    return BlueCoefficients(a=H / W * v2, H=H, W=W, v2=v2)


def default_estimator(spec: SchemeSpec) -> str:
    return spec.kind


def estimator_weights(
    estimator_id: str,
    spec: SchemeSpec,
    alpha2: float,
    lam: float | None = None,
    theta2: float = 1.0,
) -> tuple[np.ndarray, float]:
    """Return (weights, closed-form variance) of an estimator for ``spec``."""
    if estimator_id not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator_id!r}")
    if spec.kind not in ESTIMATORS[estimator_id]:
        raise ValueError(f"estimator {estimator_id!r} does not apply to a {spec.kind} sample")
    if estimator_id in NEEDS_LAMBDA:
        if lam is None:
            raise ValueError(f"estimator {estimator_id!r} needs lambda")
        if not -1.0 <= lam <= 1.0:
            raise ValueError(f"lambda must lie in [-1, 1], got {lam!r}")
    if spec.kind in UNBALANCED and not lam > 0:
        raise ValueError(f"λ must be positive for unbalanced schemes ({spec.kind}), got {lam}")
    a_ = aux_constants(alpha2)
    n = spec.n
    m = spec.n_observations
    scale = 1.0 / theta2**2

    if estimator_id in ("rss", "lrss", "erss1", "erss3"):
        return np.full(m, 1.0 / n), a_.C / n * scale
    if estimator_id == "merss":
        return np.full(m, 1.0 / (2 * n)), a_.C / (2 * n) * scale
    if estimator_id == "blue":
        coef = blue_coefficients(n, alpha2, lam)
        return coef.a, coef.v2 * scale
    if estimator_id == "crss":
        c2 = aux_constants(2.0 * alpha2).C
        delta = np.array([delta_r(n, r, lam) for r in spec.retained])
        w = len(spec.retained) + (1.0 - aux_constants(2.0 * alpha2).B / a_.B) * math.fsum(delta)
        if not w > 0:
            raise ValueError(f"censoring normalizer w must be positive, got {w}")
        v3 = math.fsum(a_.C + delta * (c2 - a_.C)) / w**2
        return np.full(m, 1.0 / w), v3 * scale
    if estimator_id == "erss2":
        weights = np.full(m, 1.0 / n)
        weights[-2:] = 1.0 / (2 * n)
        cov_term = 4.0 * lam**2 * a_.D**2 / ((n + 1) ** 2 * (n + 2))
        v4 = ((2 * n - 1) * a_.C + cov_term) / (2 * n * n)
        return weights, v4 * scale
    p = ModelParams(1.0, alpha2, 1.0, 1.0, lam)
    if estimator_id in ("urss", "msrss"):
        xi, gamma = msrss_moments(p, n, spec.stages)
        return np.full(m, 1.0 / (n * xi)), gamma / (n * xi * xi) * scale
    # ussrss
    z, i_ = steady_state_moments(p)
    return np.full(m, 1.0 / (n * z)), i_ / (n * z * z) * scale


def exact_variance(
    estimator_id: str,
    spec: SchemeSpec,
    alpha2: float,
    lam: float,
    theta2: float = 1.0,
) -> float:
    """True variance of an estimator under the MTBGED with dependence ``lam``.

    Sum of squared weights times the exact concomitant variances, plus the
    min/max covariance for the erss2 pair drawn from one set.
    """
    weights, _ = estimator_weights(estimator_id, spec, alpha2, lam, theta2)
    laws = spec.observation_laws(alpha2, theta2, lam)
    variances = np.array([concomitant_moments(law)[1] for law in laws])
    total = math.fsum(weights * weights * variances)
    if spec.kind == "erss2":
        cov = minmax_covariance(ModelParams(1.0, alpha2, 1.0, theta2, lam), spec.n)
        total += 2.0 * weights[-2] * weights[-1] * cov
    return total


def estimate(
    sample: RankedSample,
    alpha2: float,
    theta2: float | None = None,
    lam: float | None = None,
    estimator_id: str | None = None,
) -> EstimateResult:
    """Apply an estimator (by default the scheme's own) to ``sample``."""
    estimator_id = estimator_id or default_estimator(sample.scheme)
    if estimator_id in ESTIMATORS and sample.scheme.kind not in ESTIMATORS[estimator_id]:
        raise ValueError(f"estimator {estimator_id!r} does not apply to a {sample.scheme.kind} sample")
    sample.check_layout()
    weights, var = estimator_weights(estimator_id, sample.scheme, alpha2, lam, 1.0 if theta2 is None else theta2)
    params = {"alpha2": alpha2, "theta2": theta2}
    if estimator_id in NEEDS_LAMBDA:
        params["lambda"] = lam
    if theta2 is None:
        params["variance_unit"] = "1/theta2^2"
    exact = None
    if lam is not None:
        exact = exact_variance(estimator_id, sample.scheme, alpha2, lam, 1.0 if theta2 is None else theta2)
    return EstimateResult(
        estimator_id=estimator_id,
        point=math.fsum(weights * sample.y),
        closed_form_variance=var,
        scheme=sample.scheme,
        params_used=params,
        exact_variance=exact,
    )


def _require(sample: RankedSample, *kinds: str) -> None:
    if sample.scheme.kind not in kinds:
        raise ValueError(f"expected a {'/'.join(kinds)} sample, got {sample.scheme.kind}")


def est_rss(
    sample: RankedSample, alpha2: float, theta2: float | None = None, lam: float | None = None
) -> EstimateResult:
    _require(sample, "rss")
    return estimate(sample, alpha2, theta2, lam, estimator_id="rss")


def est_blue(
    sample: RankedSample, alpha2: float, theta2: float | None, lam: float
) -> tuple[EstimateResult, BlueCoefficients]:
    _require(sample, "rss")
    result = estimate(sample, alpha2, theta2, lam, estimator_id="blue")
    return result, blue_coefficients(sample.scheme.n, alpha2, lam)


def est_crss(sample: RankedSample, alpha2: float, theta2: float | None, lam: float) -> EstimateResult:
    _require(sample, "crss")
    return estimate(sample, alpha2, theta2, lam, estimator_id="crss")


def est_lrss(
    sample: RankedSample, alpha2: float, theta2: float | None = None, lam: float | None = None
) -> EstimateResult:
    _require(sample, "lrss")
    return estimate(sample, alpha2, theta2, lam, estimator_id="lrss")


def est_erss(
    sample: RankedSample, alpha2: float, theta2: float | None = None, lam: float | None = None
) -> EstimateResult:
    """ERSS estimator for whichever of erss1/erss2/erss3 produced ``sample``.

    ``lam`` is required for the erss2 variance; for erss1/erss3 it only
    enables ``exact_variance``.
    """
    _require(sample, "erss1", "erss2", "erss3")
    return estimate(sample, alpha2, theta2, lam, estimator_id=sample.scheme.kind)


def est_merss(
    sample: RankedSample, alpha2: float, theta2: float | None = None, lam: float | None = None
) -> EstimateResult:
    _require(sample, "merss")
    return estimate(sample, alpha2, theta2, lam, estimator_id="merss")


def est_msrss(sample: RankedSample, alpha2: float, theta2: float | None, lam: float) -> EstimateResult:
    _require(sample, "msrss", "urss")
    return estimate(sample, alpha2, theta2, lam, estimator_id=sample.scheme.kind)


def est_ussrss(sample: RankedSample, alpha2: float, theta2: float | None, lam: float) -> EstimateResult:
    _require(sample, "ussrss")
    return estimate(sample, alpha2, theta2, lam, estimator_id="ussrss")


def lambda_from_correlation(q: float, alpha1: float, alpha2: float) -> float:
    """Map a sample correlation to lambda, clamped to [-1, 1]."""
    bound = aux_constants(alpha1).g * aux_constants(alpha2).g
    if q < -bound:
        return -1.0
    if q > bound:
        return 1.0
    return q / bound


def est_lambda(sample: RankedSample, alpha1: float, alpha2: float) -> float:
    """Moment estimator of the dependence parameter from RSS (x, y) pairs."""
    _require(sample, "rss")
    if sample.x is None:
        raise ValueError("estimating lambda needs the measured x values")
    if len(sample) < 3:
        raise ValueError("estimating lambda needs at least 3 pairs")
    if np.ptp(sample.x) == 0 or np.ptp(sample.y) == 0:
        raise ValueError("sample correlation is undefined for constant data")
    q = float(np.corrcoef(sample.x, sample.y)[0, 1])
    return lambda_from_correlation(q, alpha1, alpha2)
