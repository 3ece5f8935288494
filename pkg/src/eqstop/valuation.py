"""Continuation values J(x, S, f) = E_x[delta(rho_S) f(X_{rho_S})].

Off S, J is a mixture over the discount rates r of the resolvent values
v_r(x) = E_x[exp(-r rho_S) f(X_{rho_S})].  On each complement interval v_r
solves -r v + mu v' + sigma^2 v'' / 2 = 0 with v = f at finite endpoints.
Constant-coefficient models use closed-form hitting transforms; otherwise a
second-order finite-difference solve with Richardson extrapolation is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg
from scipy.interpolate import CubicSpline

from .diffusion import DiffusionModel, _one_barrier, _two_barrier
from .discounting import DiscountMeasure
from .rewards import RewardFunction
from .stopping_sets import StoppingSet

# Far-field truncation: exp(-R * decay) below 1e-8.
TRUNC_LOG = -math.log(1e-8)
R_CAP = 60.0
MIN_CELLS = 2048
MAX_CELLS = 1 << 16
SMALL_RATE = 1e-10


@dataclass
class ValuationResult:
    grid: np.ndarray
    values: np.ndarray
    per_rate_values: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Resolvent ODE
# ---------------------------------------------------------------------------


def _bounded_exponent(mu, sig2, r, side):
    """Exponent g of the solution exp(g x) that stays bounded toward ``side``."""
    root = np.sqrt(mu * mu + 2.0 * r * sig2)
    return (-mu + root) / sig2 if side == "left" else (-mu - root) / sig2


def _fd_solve(model, r, x, left, right):
    """Central differences on the uniform mesh ``x``.

    ``left``/``right`` are either a Dirichlet value or ``None`` for the
    frozen-coefficient far-field condition v' = g v.
    """
    n = x.size
    h = x[1] - x[0]
    mu = model.mu(x)
    sig2 = model.sigma(x) ** 2
    lower = 0.5 * sig2 / h**2 - 0.5 * mu / h
    diag = -sig2 / h**2 - r
    upper = 0.5 * sig2 / h**2 + 0.5 * mu / h
    rhs = np.zeros(n)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    if left is None:
        g = _bounded_exponent(mu[0], sig2[0], r, "left")
        ab[1, 0] = diag[0] - 2.0 * h * g * lower[0]
        ab[0, 1] = upper[0] + lower[0]
    else:
        ab[1, 0], ab[0, 1], rhs[0] = 1.0, 0.0, left
    if right is None:
        g = _bounded_exponent(mu[-1], sig2[-1], r, "right")
        ab[1, -1] = diag[-1] + 2.0 * h * g * upper[-1]
        ab[2, -2] = lower[-1] + upper[-1]
    else:
        ab[1, -1], ab[2, -2], rhs[-1] = 1.0, 0.0, right
    return linalg.solve_banded((1, 1), ab, rhs, check_finite=False)


def _mesh_cells(model, r, length, n_cells):
    if n_cells is not None:
        return int(n_cells)
    mb, sb = model.mu_bound, max(model.sigma_bound, math.sqrt(model.ellipticity_L))
    L = model.ellipticity_L
    # fastest local exponent and mesh Peclet number both resolved
    kmax = (mb + math.sqrt(mb * mb + 2.0 * r * sb * sb)) / L
    need = max(length * kmax / 0.02, length * mb / L / 0.5)
    return int(min(MAX_CELLS, max(MIN_CELLS, math.ceil(need))))


def _truncation_radius(model, r):
    mb, sb = model.mu_bound, model.sigma_bound
    decay = (math.sqrt(mb * mb + 2.0 * r * model.ellipticity_L) - mb) / (sb * sb)
    if decay <= 0:
        return R_CAP
    return float(min(R_CAP, max(2.0, TRUNC_LOG / decay)))


def solve_resolvent(model: DiffusionModel, r: float, interval, boundary_values, query=None,
                    n_cells: int | None = None, richardson: bool = True):
    """Solve -r v + mu v' + sigma^2 v''/2 = 0 on an open interval.

    Parameters
    ----------
    interval : (lo, hi)
        Endpoints may be infinite (or equal to a domain end); such ends use
        the far-field condition and ``boundary_values`` entries there are
        ignored.
    boundary_values : (v_lo, v_hi)
        Dirichlet data at finite endpoints.
    query : array, optional
        Points in the interval at which to return the solution.

    Returns
    -------
    (mesh, values) when ``query`` is None, else values at ``query``.
    """
    if r < 0:
        raise ValueError("rate must be nonnegative")
    lo, hi = interval
    v_lo, v_hi = boundary_values
    dom_lo, dom_hi = model.domain
    open_lo = math.isinf(lo) or lo <= dom_lo
    open_hi = math.isinf(hi) or hi >= dom_hi
    q = None if query is None else np.asarray(query, dtype=float)

    if open_lo and open_hi:
        # no barrier to reach: rho = inf and the value vanishes
        if q is not None:
            return np.zeros_like(q)
        return np.array([lo, hi]), np.zeros(2)

    if not (open_lo or open_hi) and hi - lo < 1e-12:
        if q is not None:
            return np.interp(q, [lo, hi], [v_lo, v_hi])
        return np.array([lo, hi]), np.array([v_lo, v_hi], dtype=float)

    R = _truncation_radius(model, r)
    a, b = lo, hi
    if math.isinf(lo):
        qmin = q.min() if q is not None and q.size else hi
        a = min(qmin, hi) - R
    if math.isinf(hi):
        qmax = q.max() if q is not None and q.size else lo
        b = max(qmax, lo) + R
    n = _mesh_cells(model, r, b - a, n_cells)
    left = None if open_lo else v_lo
    right = None if open_hi else v_hi
    xc = np.linspace(a, b, n + 1)
    vc = _fd_solve(model, r, xc, left, right)
    if richardson:
        xf = np.linspace(a, b, 2 * n + 1)
        vf = _fd_solve(model, r, xf, left, right)
        vc = (4.0 * vf[::2] - vc) / 3.0
    if q is None:
        return xc, vc
    return CubicSpline(xc, vc)(q)


# ---------------------------------------------------------------------------
# Interval values
# ---------------------------------------------------------------------------


def _is_open_end(model, e, side):
    lo, hi = model.domain
    return math.isinf(e) or (e <= lo if side == "lo" else e >= hi)


def interval_rate_values(model: DiffusionModel, D: DiscountMeasure, f: RewardFunction, lo: float, hi: float,
                         x, method: str = "auto") -> np.ndarray:
    """Matrix v_r(x) (rates x points) for stopping at the ends of (lo, hi)."""
    x = np.asarray(x, dtype=float)
    rates = D.rates
    open_lo = _is_open_end(model, lo, "lo")
    open_hi = _is_open_end(model, hi, "hi")
    if open_lo and open_hi:
        return np.zeros((rates.size, x.size))
    f_lo = 0.0 if open_lo else float(f(lo))
    f_hi = 0.0 if open_hi else float(f(hi))
    use_closed = model.is_constant and method in ("auto", "closed")
    if method == "closed" and not model.is_constant:
        raise NotImplementedError("closed forms need constant coefficients")
    if use_closed:
        r = rates[:, None]
        if open_lo:
            return f_hi * _one_barrier(model, x[None, :], hi, r)
        if open_hi:
            return f_lo * _one_barrier(model, x[None, :], lo, r)
        pa, pb = _two_barrier(model, x[None, :], lo, hi, r)
        return f_lo * pa + f_hi * pb
    out = np.empty((rates.size, x.size))
    for i, r in enumerate(rates):
        # tiny rates: the r -> 0 limit (hitting-probability interpolation)
        r = 0.0 if r < SMALL_RATE else float(r)
        out[i] = solve_resolvent(model, r, (lo, hi), (f_lo, f_hi), query=x)
    return out


def interval_values(model, D, f, lo, hi, x, method="auto") -> np.ndarray:
    return D.weights @ interval_rate_values(model, D, f, lo, hi, x, method)


def continuation_value(model: DiffusionModel, D: DiscountMeasure, f: RewardFunction, S: StoppingSet, grid,
                       method: str = "auto", per_rate: bool = False) -> ValuationResult:
    """J(x, S, f) on ``grid``.

    ``method`` is ``"auto"`` (closed forms when the model has constant
    coefficients), ``"closed"`` or ``"ode"``.
    """
    grid = np.asarray(grid, dtype=float)
    if not np.all(model.contains(grid)):
        raise ValueError("grid points outside the state space")
    values = np.zeros(grid.shape)
    rv = np.zeros((D.n_rates, grid.size)) if per_rate else None
    inside = S.contains(grid)
    values[inside] = f(grid[inside])
    if per_rate:
        rv[:, inside] = values[inside]
    intervals = S.complement_intervals(model.domain)
    for lo, hi in intervals:
        m = (grid > lo) & (grid < hi) & ~inside
        if not np.any(m):
            continue
        v = interval_rate_values(model, D, f, lo, hi, grid[m], method)
        values[m] = D.weights @ v
        if per_rate:
            rv[:, m] = v
    diag = {
        "method": "closed" if (model.is_constant and method != "ode") else "ode",
        "quad_nodes": D.n_rates,
        "n_intervals": len(intervals),
        "min_cells": MIN_CELLS,
        "truncation_cap": R_CAP,
    }
    return ValuationResult(grid, values, rv, diag)


# ---------------------------------------------------------------------------
# Closed forms for unit-volatility Brownian motion with drift mu0
# ---------------------------------------------------------------------------


def _s_integral(g, x):
    """int_0^inf e^{-s} g(s, x) ds by adaptive quadrature in w = sqrt(s)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def integrand(w):
        s = w * w
        return 2.0 * w * np.exp(-s) * g(s, x)

    val, _ = integrate.quad_vec(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def closed_form_J_b(x, b: float, d: float, beta: float, mu0: float = 0.0):
    """d * int e^{-s} E_x[exp(-beta s rho_b)] ds for hyperbolic discounting."""

    def g(s, x):
        k = np.sqrt(2.0 * beta * s + mu0 * mu0)
        return np.exp(mu0 * (b - x) - np.abs(b - x) * k)

    out = d * _s_integral(g, x)
    return float(out[0]) if np.ndim(x) == 0 else out


def closed_form_J_ab(params, x):
    """Two-barrier continuation value with payoffs c at a and d at b.

    ``params`` holds (a, b, c, d, beta, mu0); mu0 = 0 is the driftless case.
    Left of a the process can only stop at a; right of b only at b.
    """
    a, b, c, d, beta, mu0 = params
    if not a < b or c <= 0 or d <= 0 or beta <= 0:
        raise ValueError("need a < b and c, d, beta > 0")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    left, mid, right = x < a, (x >= a) & (x <= b), x > b
    if left.any():
        out[left] = closed_form_J_b(x[left], a, c, beta, mu0)
    if right.any():
        out[right] = closed_form_J_b(x[right], b, d, beta, mu0)
    if mid.any():
        xm = x[mid]

        def g(s, xm):
            k = math.sqrt(2.0 * beta * s + mu0 * mu0)
            den = -np.expm1(-2.0 * k * (b - a))
            with np.errstate(invalid="ignore", divide="ignore"):
                pa = np.exp(-mu0 * (xm - a) - k * (xm - a)) * (-np.expm1(-2.0 * k * (b - xm))) / den
                pb = np.exp(-mu0 * (xm - b) - k * (b - xm)) * (-np.expm1(-2.0 * k * (xm - a))) / den
            if k == 0:
                pa, pb = (b - xm) / (b - a), (xm - a) / (b - a)
            return c * pa + d * pb

        out[mid] = _s_integral(g, xm)
    return float(out[0]) if scalar else out
