"""Independent oracles shared by the test modules.

Nothing here calls the package's own moment formulas: special functions come
from mpmath at 40 digits and moments from adaptive quadrature of the density.
"""

import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from mtbged_rss import model

mpmath.mp.dps = 40


def mp_digamma(x):
    return float(mpmath.digamma(mpmath.mpf(x)))


def mp_trigamma(x):
    return float(mpmath.polygamma(1, mpmath.mpf(x)))


def mp_constants(alpha):
    """(B, C, D) from their digamma/trigamma definitions at high precision."""
    a = mpmath.mpf(alpha)
    b = mpmath.digamma(a + 1) - mpmath.digamma(1)
    c = mpmath.polygamma(1, 1) - mpmath.polygamma(1, a + 1)
    d = mpmath.digamma(2 * a + 1) - mpmath.digamma(1) - b
    return float(b), float(c), float(d)


def upper_limit(alpha, theta):
    return model.marginal_quantile(alpha, theta, 1.0 - 1e-12)


def quad_moments(pdf, alpha, theta):
    """Mean and variance of a density on (0, inf) by adaptive quadrature."""
    hi = upper_limit(alpha, theta)
    opts = dict(epsabs=0.0, epsrel=1e-10, limit=400)
    m0 = integrate.quad(pdf, 0.0, hi, **opts)[0]
    m1 = integrate.quad(lambda y: y * pdf(y), 0.0, hi, **opts)[0]
    m2 = integrate.quad(lambda y: y * y * pdf(y), 0.0, hi, **opts)[0]
    mean = m1 / m0
    return m0, mean, m2 / m0 - mean * mean


def safe_pdf(fn):
    """Wrap a density so quadrature may probe y = 0."""
    return lambda y: 0.0 if y <= 0.0 else float(fn(y))


def ks_critical(n1, n2, alpha=0.01):
    """Asymptotic two-sample KS critical distance."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n1 + n2) / (n1 * n2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance verdict lines, printed at the end of the session
ACCEPTANCE_LINES = {}


def record_criterion(key, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {key}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(str(k).split("-")[0]), str(k))):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
