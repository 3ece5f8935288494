"""Independent reference values, computed without the package's kernels."""

import math

import numpy as np
from scipy import integrate


def hyperbolic_delta(beta, t):
    return 1.0 / (1.0 + beta * np.asarray(t, dtype=float))


def _s_quad(g):
    # substitute s = w^2 to remove the sqrt singularity at s = 0
    val, _ = integrate.quad(lambda w: 2.0 * w * math.exp(-w * w) * g(w * w), 0.0, math.inf,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def one_barrier_J(x, b, payoff, beta, mu0=0.0):
    """payoff * int e^{-s} E_x[exp(-beta s rho_b)] ds for Brownian motion with drift mu0."""
    dist = b - x

    def g(s):
        k = math.sqrt(2.0 * beta * s + mu0 * mu0)
        return math.exp(mu0 * dist - abs(dist) * k)

    return payoff * _s_quad(g)


def two_barrier_J(x, a, b, c, d, beta, mu0=0.0):
    """Payoffs c at a and d at b, Brownian motion with drift mu0, x in [a, b]."""

    def g(s):
        k = math.sqrt(2.0 * beta * s + mu0 * mu0)
        if k * (b - a) > 300:
            # both ratios vanish faster than e^{-s} matters; use the asymptotic form
            pa = math.exp(-mu0 * (x - a) - k * (x - a))
            pb = math.exp(-mu0 * (x - b) - k * (b - x))
            return c * pa + d * pb
        den = math.sinh(k * (b - a))
        return (c * math.exp(-mu0 * (x - a)) * math.sinh(k * (b - x))
                + d * math.exp(-mu0 * (x - b)) * math.sinh(k * (x - a))) / den

    return _s_quad(g)


def laplace_one(x, b, lam, mu0=0.0, sigma0=1.0):
    """E_x[exp(-lam rho_b)] for dX = mu0 dt + sigma0 dW (textbook formula)."""
    v = sigma0 * sigma0
    return math.exp((mu0 * (b - x) - abs(b - x) * math.sqrt(mu0 * mu0 + 2.0 * lam * v)) / v)


def tent_alpha(beta):
    """1 / (sqrt(2 beta) Gamma(3/2)) = sqrt(2 / (pi beta))."""
    return math.sqrt(2.0 / (math.pi * beta))
