"""Shared test oracles, independent of the package internals."""

from fractions import Fraction

import numpy as np

from gpcsim.basis import Beta, Gamma, Gaussian, Uniform


def germ_moments(dist, n):
    """E[xi^k] for k = 0..n as exact Fractions (closed forms per family)."""
    m = [Fraction(0)] * (n + 1)
    m[0] = Fraction(1)
    if isinstance(dist, Gaussian):
        for k in range(2, n + 1, 2):
            m[k] = m[k - 2] * (k - 1)
    elif isinstance(dist, Uniform):
        for k in range(2, n + 1, 2):
            m[k] = Fraction(1, k + 1)
    elif isinstance(dist, Gamma):
        g = Fraction(dist.gamma).limit_denominator(10**6)
        for k in range(1, n + 1):
            m[k] = m[k - 1] * (g + k - 1)
    elif isinstance(dist, Beta):
        a = Fraction(dist.alpha).limit_denominator(10**6)
        b = Fraction(dist.beta).limit_denominator(10**6)
        for k in range(1, n + 1):
            m[k] = m[k - 1] * (a + k - 1) / (a + b + k - 1)
    else:
        raise AssertionError(dist)
    return m


def truncated_support(dist):
    """Integration window that carries the full mass to beyond 1e-25."""
    lo, hi = dist.support()
    if isinstance(dist, Gaussian):
        return -40.0, 40.0
    if isinstance(dist, Gamma):
        return 0.0, 250.0 + 10.0 * dist.gamma
    return float(lo), float(hi)


def simpson_moment(dist, degree, panels=10**6, absolute=False):
    """Composite-Simpson reference for E[xi^degree] (or E[|xi|^degree]).

    `panels` subintervals over the (truncated) support; panels must be even.
    """
    if panels % 2:
        raise ValueError("composite Simpson needs an even panel count")
    lo, hi = truncated_support(dist)
    x = np.linspace(lo, hi, panels + 1)
    fx = (np.abs(x) if absolute else x) ** degree * dist.pdf(x)
    h = (hi - lo) / panels
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(h / 3.0 * np.dot(w, fx))
