"""Convergence experiments for sequences of models (f^n, Q^n) -> (f, Q).

Two worked examples are built in:

* the "two-barrier" example: Brownian motion with drift -1/n, hyperbolic
  discounting and a reward that makes {b} the smallest equilibrium in the
  limit while {a, b} is the smallest equilibrium for every large finite n;
* the "shifted tent" example: a unit-slope tent of height alpha centred at
  1/n, whose smallest equilibrium {1/n} escapes every fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .diffusion import DiffusionModel, _one_barrier, _two_barrier, constant_model
from .discounting import DiscountMeasure, hyperbolic_measure
from .equilibrium import (
    EpsSearchConfig,
    check_equilibrium,
    epsilon_value_table,
    smallest_equilibrium,
)
from .rewards import Piece, RewardFunction, make_reward, tent_reward
from .stopping_sets import StoppingSet, set_liminf_limsup
from .valuation import closed_form_J_ab, closed_form_J_b, continuation_value

INF = math.inf
DEFAULT_N_LIST = (2, 4, 8, 16, 32, 64)
DEFAULT_EPS_LIST = (0.2, 0.1, 0.05, 0.02)


def make_grid(lo: float, hi: float, h: float, pins=()) -> np.ndarray:
    """Uniform grid on [lo, hi] with step ~h; the nearest nodes are moved onto ``pins``."""
    n = int(round((hi - lo) / h))
    g = np.linspace(lo, hi, n + 1)
    for p in pins:
        if lo <= p <= hi:
            g[int(np.argmin(np.abs(g - p)))] = p
    return g


def _label(n) -> str:
    return "inf" if n == INF else str(int(n))


# ---------------------------------------------------------------------------
# Model sequences
# ---------------------------------------------------------------------------


@dataclass
class ModelSequence:
    """Indexed family (Q^n, f^n) with a shared discount measure; ``inf`` is the limit."""

    models: dict
    rewards: dict
    D: DiscountMeasure
    probe: np.ndarray
    name: str = "sequence"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if INF not in self.models or set(self.models) != set(self.rewards):
            raise ValueError("sequence needs matching model/reward indices including inf")
        self.validate()

    @property
    def finite_indices(self) -> list:
        return sorted(n for n in self.models if n != INF)

    @property
    def indices(self) -> list:
        return self.finite_indices + [INF]

    def distance(self, n) -> float:
        """Sup-norm distance of drift, volatility and reward to the limit on the probe grid."""
        p = self.probe
        m, m0 = self.models[n], self.models[INF]
        return float(np.max(np.abs(m.mu(p) - m0.mu(p))) + np.max(np.abs(m.sigma(p) - m0.sigma(p)))
                     + np.max(np.abs(self.rewards[n](p) - self.rewards[INF](p))))

    def validate(self) -> dict:
        d = [self.distance(n) for n in self.finite_indices]
        if not all(np.isfinite(d)):
            raise ValueError("distances to the limit must be finite")
        if any(d1 > d0 + 1e-12 for d0, d1 in zip(d, d[1:])):
            raise ValueError("distances to the limit must decrease along the sequence")
        bound = max(m.mu_bound + m.sigma_bound for m in self.models.values())
        L = min(m.ellipticity_L for m in self.models.values())
        if not (math.isfinite(bound) and L > 0):
            raise ValueError("coefficient bounds must hold uniformly")
        return {"distances": d, "coef_bound": bound, "ellipticity_L": L}

    def restricted(self, indices) -> "ModelSequence":
        keep = set(indices) | {INF}
        return ModelSequence({n: m for n, m in self.models.items() if n in keep},
                             {n: f for n, f in self.rewards.items() if n in keep},
                             self.D, self.probe, self.name, dict(self.meta))


def constant_sequence(model: DiffusionModel, f: RewardFunction, D: DiscountMeasure, n_list, probe) -> ModelSequence:
    """Control sequence with every member equal to the limit."""
    idx = list(n_list) + [INF]
    return ModelSequence({n: model for n in idx}, {n: f for n in idx}, D, np.asarray(probe), "constant")


# ---------------------------------------------------------------------------
# Two-barrier example
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoBarrierParams:
    a: float = 0.0
    b: float = 1.0
    d: float = 1.0
    beta: float = 1.0
    L0: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")
        if not (self.d > 0 and self.beta > 0 and self.L0 > 0):
            raise ValueError("need d, beta, L0 > 0")


class TwoBarrierKernels:
    """J_b, J_{a,b} and c = J_b(a) for drift ``mu0`` on the discount measure's nodes.

    Using the same nodes as the valuation engine keeps the reward exactly
    consistent with computed continuation values (ties at a and on [b, inf)).
    """

    def __init__(self, p: TwoBarrierParams, D: DiscountMeasure, mu0: float = 0.0, c: float | None = None):
        self.p, self.D = p, D
        self.model = constant_model(mu0)
        self.r = D.rates[:, None]
        self.c = float(self.J_b(np.array([p.a]))[0]) if c is None else c

    def J_b(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.p.d * (self.D.weights @ _one_barrier(self.model, x[None, :], self.p.b, self.r))

    def J_ab(self, x):
        p = self.p
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        left, right = x < p.a, x > p.b
        mid = ~left & ~right
        if left.any():
            out[left] = self.c * (self.D.weights @ _one_barrier(self.model, x[left][None, :], p.a, self.r))
        if right.any():
            out[right] = self.J_b(x[right])
        if mid.any():
            pa, pb = _two_barrier(self.model, x[mid][None, :], p.a, p.b, self.r)
            out[mid] = self.D.weights @ (self.c * pa + p.d * pb)
        return out


def two_barrier_reward(p: TwoBarrierParams, D: DiscountMeasure) -> tuple:
    """(f, kernels) with f = e^{-2(a-x)} J_ab left of a, J_ab/(1+L0(x-a)(b-x)) on [a,b], J_b right of b."""
    k = TwoBarrierKernels(p, D)
    a, b, L0 = p.a, p.b, p.L0

    def left(x):
        return np.exp(-2.0 * (a - x)) * k.J_ab(x)

    def middle(x):
        return k.J_ab(x) / (1.0 + L0 * (x - a) * (b - x))

    pieces = [Piece(-INF, a, left, "scaled-exponential"), Piece(a, b, middle, "rational"), Piece(b, INF, k.J_b, "tabulated")]
    probe = np.linspace(a - 6.0 * (b - a) - 6.0, b + 6.0 * (b - a) + 6.0, 8001)
    f = make_reward(pieces, probe, meta={"example": "two-barrier", "c": k.c})
    return f, k


def two_barrier_sequence(p: TwoBarrierParams = TwoBarrierParams(), n_list=DEFAULT_N_LIST, n_nodes: int = 64,
                         probe=None) -> ModelSequence:
    D = hyperbolic_measure(p.beta, n_nodes)
    f, k = two_barrier_reward(p, D)
    models = {n: constant_model(-1.0 / n) for n in n_list}
    models[INF] = constant_model(0.0)
    probe = np.linspace(p.a - 3, p.b + 3, 601) if probe is None else probe
    return ModelSequence(models, {n: f for n in models}, D, probe, "two-barrier", {"params": p.__dict__, "c": k.c})


# ---------------------------------------------------------------------------
# Shifted-tent example
# ---------------------------------------------------------------------------


def tent_height(beta: float) -> dict:
    """alpha = 1 / int e^{-s} sqrt(2 beta s) ds by quadrature and by the Gamma identity."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    val, err = integrate.quad(lambda s: math.exp(-s) * math.sqrt(2.0 * beta * s), 0.0, INF, epsabs=1e-14, epsrel=1e-13)
    exact = math.sqrt(2.0 * beta) * special.gamma(1.5)
    return {"alpha_quad": 1.0 / val, "alpha_gamma": 1.0 / exact, "quad_error": err}


def shifted_tent_sequence(beta: float = 2.0, n_list=(1, 2, 4, 8, 16), n_nodes: int = 64, probe=None) -> ModelSequence:
    D = hyperbolic_measure(beta, n_nodes)
    alpha = tent_height(beta)["alpha_quad"]
    model = constant_model(0.0)
    rewards = {n: tent_reward(alpha, 1.0 / n) for n in n_list}
    rewards[INF] = tent_reward(alpha, 0.0)
    probe = np.linspace(-3, 3, 1201) if probe is None else probe
    return ModelSequence({n: model for n in rewards}, rewards, D, probe, "shifted-tent", {"beta": beta, "alpha": alpha})


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def uniform_J_gap(seq: ModelSequence, test_sets, grid, method: str = "auto") -> dict:
    """Table of (n, d_n, g_n) with g_n = max over grid and test sets of |J^n - J^inf|."""
    grid = np.asarray(grid, dtype=float)
    ref = [continuation_value(seq.models[INF], seq.D, seq.rewards[INF], S, grid, method=method).values for S in test_sets]
    rows = []
    for n in seq.indices:
        g = 0.0
        for S, J0 in zip(test_sets, ref):
            J = continuation_value(seq.models[n], seq.D, seq.rewards[n], S, grid, method=method).values
            g = max(g, float(np.max(np.abs(J - J0))))
        rows.append({"n": _label(n), "d_n": seq.distance(n), "g_n": g})
    fin = [r for r in rows if r["n"] != "inf" and r["d_n"] > 0]
    d = np.array([r["d_n"] for r in fin])
    gn = np.array([r["g_n"] for r in fin])
    C_ls = float(d @ gn / (d @ d)) if d.size else 0.0
    C_max = float(np.max(gn / d)) if d.size else 0.0
    decreasing = bool(all(b < a for a, b in zip(gn, gn[1:])))
    return {"rows": rows, "C_fit": C_ls, "C_bound": C_max, "strictly_decreasing": decreasing}


def value_profiles(seq: ModelSequence, grid, method: str = "auto") -> dict:
    """V^n on the grid and S*^n for every index."""
    out = {}
    for n in seq.indices:
        S = smallest_equilibrium(seq.models[n], seq.D, seq.rewards[n], grid, method=method)
        V = continuation_value(seq.models[n], seq.D, seq.rewards[n], S, grid, method=method).values
        out[n] = (S, V)
    return out


def theorem32_usc_check(seq: ModelSequence, grid, tail_from=None, method: str = "auto") -> dict:
    """Upper semicontinuity margins V^inf(x) - max_{n >= N0} V^n(x).

    ``tail_from`` (N0) defaults to the upper half of the finite indices.  A
    Richardson estimate of lim V^n from the last three dyadic indices is
    reported alongside the raw tail maximum.
    """
    grid = np.asarray(grid, dtype=float)
    prof = value_profiles(seq, grid, method)
    fin = seq.finite_indices
    N0 = fin[len(fin) // 2] if tail_from is None else tail_from
    tail = [n for n in fin if n >= N0]
    if not tail:
        raise ValueError("no indices at or beyond N0")
    V_inf = prof[INF][1]
    tail_max = np.max([prof[n][1] for n in tail], axis=0)
    margin = V_inf - tail_max
    out = {
        "N0": N0,
        "tail": [int(n) for n in tail],
        "grid": grid,
        "margin": margin,
        "min_margin": float(margin.min()),
        "argmin": float(grid[int(np.argmin(margin))]),
        "flagged": grid[margin < -1e-6],
        "sets": {_label(n): str(prof[n][0]) for n in seq.indices},
    }
    if len(fin) >= 3:
        n1, n2, n3 = fin[-3:]
        if n2 == 2 * n1 and n3 == 2 * n2:
            V1, V2, V3 = prof[n1][1], prof[n2][1], prof[n3][1]
            # V^n = L + A/n + B/n^2: eliminate A and B
            lim = (8.0 * V3 - 6.0 * V2 + V1) / 3.0
            out["extrapolated_margin"] = V_inf - lim
    return out


def epsilon_matrix(seq: ModelSequence, xs, eps_list, grid, stride: int = 8, method: str = "auto") -> dict:
    """V_eps^{Q^n}(x) for every index n, eps and probe x, plus V^n(x)."""
    grid = np.asarray(grid, dtype=float)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    vals, V = {}, {}
    for n in seq.indices:
        m, f = seq.models[n], seq.rewards[n]
        S = smallest_equilibrium(m, seq.D, f, grid, method=method)
        V[n] = continuation_value(m, seq.D, f, S, xs, method=method).values
        cfg = EpsSearchConfig(grid, stride, method, S)
        vals[n], _ = epsilon_value_table(m, seq.D, f, eps_list, xs, cfg)
    return {"eps": list(eps_list), "x": xs, "V_eps": vals, "V": V}


def theorem31_double_limit(seq: ModelSequence, x: float, eps_list=DEFAULT_EPS_LIST, grid=None, stride: int = 8,
                           method: str = "auto") -> dict:
    """Matrix of V_eps^{Q^n}(x) over (eps, n) with per-eps plateaus at the largest n."""
    em = epsilon_matrix(seq, [x], eps_list, grid, stride, method)
    fin = seq.finite_indices
    V_inf = float(em["V"][INF][0])
    matrix = {_label(n): [float(v) for v in em["V_eps"][n][:, 0]] for n in seq.indices}
    plateau = [float(em["V_eps"][fin[-1]][i, 0]) for i in range(len(eps_list))]
    spread = [float(abs(em["V_eps"][fin[-1]][i, 0] - em["V_eps"][fin[-2]][i, 0])) if len(fin) > 1 else 0.0
              for i in range(len(eps_list))]
    sup = max(f.sup for f in seq.rewards.values())
    dev = abs(plateau[int(np.argmin(eps_list))] - V_inf)
    return {"x": x, "eps": list(eps_list), "matrix": matrix, "plateau": plateau, "plateau_spread": spread,
            "V_inf": V_inf, "final_deviation": dev, "f_sup": sup, "within_tolerance": bool(dev <= 0.02 * sup)}


def _dyadic_step(n) -> float:
    if n is None:
        return INF
    return math.log2(n)


def example41_reproduce(p: TwoBarrierParams = TwoBarrierParams(), n_list=DEFAULT_N_LIST, grid_h: float = 1 / 64,
                        window=(-3.0, 4.0), n_nodes: int = 64, probe_offset: float = -1.0, mc=None,
                        method: str = "auto") -> dict:
    """Two-barrier example: orderings, smallest equilibria, threshold, sandwich and value gap."""
    seq = two_barrier_sequence(p, n_list, n_nodes)
    D, f = seq.D, seq.rewards[INF]
    k = TwoBarrierKernels(p, D)
    grid = make_grid(window[0], window[1], grid_h, pins=(p.a, p.b))
    Jb, Jab, fv = k.J_b(grid), k.J_ab(grid), f(grid)

    strict = (grid < p.a) | ((grid > p.a) & (grid < p.b))
    eq = ~strict
    ordering = {
        "strict_ok": bool(np.all(Jb[strict] > Jab[strict]) and np.all(Jab[strict] > fv[strict])),
        "min_Jb_minus_Jab": float(np.min(Jb[strict] - Jab[strict])),
        "min_Jab_minus_f": float(np.min(Jab[strict] - fv[strict])),
        "max_equality_error": float(max(np.max(np.abs(Jb[eq] - Jab[eq])), np.max(np.abs(Jab[eq] - fv[eq])))),
    }
    ordering["equality_ok"] = ordering["max_equality_error"] <= 1e-8

    S_inf = smallest_equilibrium(seq.models[INF], D, f, grid, method=method)
    thr = {}
    for h in (grid_h, grid_h / 2):
        g = grid if h == grid_h else make_grid(window[0], window[1], h, pins=(p.a, p.b))
        sets = {n: smallest_equilibrium(seq.models[n], D, f, g, method=method) for n in n_list}
        ab = StoppingSet.points(p.a, p.b)
        hits = [n for n in n_list if sets[n].approx_equal(ab, h)]
        threshold = None
        for i, n in enumerate(n_list):
            if all(sets[m].approx_equal(ab, h) for m in n_list[i:]):
                threshold = n
                break
        thr[h] = {"threshold": threshold, "sets": {_label(n): str(s) for n, s in sets.items()}, "ab_indices": hits}
    t1, t2 = thr[grid_h]["threshold"], thr[grid_h / 2]["threshold"]
    stable = t1 is not None and t2 is not None and abs(_dyadic_step(t1) - _dyadic_step(t2)) <= 1

    below = grid < p.b
    sandwich = []
    for n in n_list:
        Jn = continuation_value(seq.models[n], D, f, StoppingSet.points(p.b), grid[below], method=method).values
        lower = Jb[below] * np.exp(-2.0 * np.abs(p.b - grid[below]) / n)
        sandwich.append({"n": n, "lower_margin": float(np.min(Jn - lower)), "upper_margin": float(np.min(Jb[below] - Jn)),
                         "ok": bool(np.all(Jn > lower) and np.all(Jn < Jb[below]))})

    x0 = p.a + probe_offset
    n_ref = max(n_list)
    V_inf = float(continuation_value(seq.models[INF], D, f, S_inf, [x0], method=method).values[0])
    S_n = smallest_equilibrium(seq.models[n_ref], D, f, grid, method=method)
    V_n = float(continuation_value(seq.models[n_ref], D, f, S_n, [x0], method=method).values[0])
    oracle_Jb = float(closed_form_J_b(x0, p.b, p.d, p.beta))
    oracle_Jab = float(closed_form_J_ab((p.a, p.b, k.c, p.d, p.beta, 0.0), x0))
    oracle_Jab_n = float(closed_form_J_ab((p.a, p.b, k.c, p.d, p.beta, -1.0 / n_ref), x0))
    gap = {
        "x": x0, "n": n_ref, "V_inf": V_inf, "V_n": V_n, "V_gap": V_inf - V_n,
        "J_b": oracle_Jb, "J_ab": oracle_Jab, "limit_gap": oracle_Jb - oracle_Jab,
        "J_ab_n": oracle_Jab_n,
        "V_inf_error": abs(V_inf - oracle_Jb), "V_n_error": abs(V_n - oracle_Jab_n),
    }
    if mc is not None:
        from .mc_oracle import estimate_J

        r_b = estimate_J(seq.models[INF], D, f, StoppingSet.points(p.b), x0, mc)
        r_ab = estimate_J(seq.models[INF], D, f, StoppingSet.points(p.a, p.b), x0, mc)
        gap["mc"] = {"J_b": r_b.estimate, "J_b_se": r_b.stderr, "J_ab": r_ab.estimate, "J_ab_se": r_ab.stderr}

    curves = np.column_stack([grid, Jb, Jab, fv])
    return {
        "params": p.__dict__, "c": k.c, "grid": {"lo": window[0], "hi": window[1], "h": grid_h, "n": grid.size},
        "ordering": ordering, "S_star_inf": str(S_inf), "S_star_inf_set": S_inf,
        "S_star_inf_ok": S_inf.approx_equal(StoppingSet.points(p.b), grid_h),
        "threshold": {str(h): v for h, v in thr.items()}, "threshold_n": t1, "threshold_stable": stable,
        "sandwich": sandwich, "gap": gap, "curves": curves, "curve_columns": ["x", "J_b", "J_ab", "f"],
    }


def one_sided_slopes(J, p: float, h: float) -> tuple:
    """Left/right derivatives of J at p from differences at h, 2h, 4h with Richardson extrapolation."""
    def combine(d1, d2, d4):
        return (8.0 * d1 - 6.0 * d2 + d4) / 3.0

    def diff(k, side):
        q = p + side * k * h
        v = J(np.array([p, q]))
        return (v[0] - v[1]) / (k * h) if side < 0 else (v[1] - v[0]) / (k * h)

    left = combine(diff(1, -1), diff(2, -1), diff(4, -1))
    right = combine(diff(1, 1), diff(2, 1), diff(4, 1))
    return float(left), float(right)


def example42_reproduce(beta: float = 2.0, n_list=(1, 2, 4, 8, 16), h: float = 1 / 64, window=(-1.5, 2.5),
                        n_nodes: int = 64, method: str = "auto") -> dict:
    """Shifted-tent example: alpha, S*^n = {1/n}, slopes +-1 at 1/n, convexity and set limits."""
    alpha = tent_height(beta)
    seq = shifted_tent_sequence(beta, n_list, n_nodes)
    D = seq.D
    centres = {n: (0.0 if n == INF else 1.0 / n) for n in seq.indices}
    grid = make_grid(window[0], window[1], h, pins=tuple(centres.values()))
    rows = []
    sets = {}
    for n in seq.indices:
        m, f = seq.models[n], seq.rewards[n]
        c = centres[n]
        S = smallest_equilibrium(m, D, f, grid, method=method)
        sets[n] = S
        single = StoppingSet.points(c)

        def J(x, m=m, f=f, single=single):
            return continuation_value(m, D, f, single, np.asarray(x, dtype=float), method=method).values

        left, right = one_sided_slopes(J, c, h)
        Jg = J(grid)
        off = np.abs(grid[1:-1] - c) > 1.5 * h
        second = (Jg[2:] - 2.0 * Jg[1:-1] + Jg[:-2])[off]
        rows.append({
            "n": _label(n), "centre": c, "S_star": str(S), "S_ok": S.approx_equal(single, h),
            "slope_left": left, "slope_right": right,
            "slope_error": max(abs(left - 1.0), abs(right + 1.0)),
            "min_second_difference": float(second.min()), "convex_ok": bool(np.all(second > 0)),
        })
    finite_sets = [sets[n] for n in seq.finite_indices]
    liminf, limsup = set_liminf_limsup(finite_sets, grid, h)
    return {
        "beta": beta, "alpha": alpha, "alpha_error": abs(alpha["alpha_quad"] - alpha["alpha_gamma"]),
        "grid": {"lo": window[0], "hi": window[1], "h": h, "n": grid.size},
        "rows": rows, "liminf": str(liminf), "limsup": str(limsup), "limsup_empty": limsup.is_empty,
        "S_star_inf": str(sets[INF]), "S_star_inf_ok": sets[INF].approx_equal(StoppingSet.points(0.0), h),
    }


def equilibrium_checks(seq: ModelSequence, S: StoppingSet, grid, eps: float = 0.0, method: str = "auto") -> dict:
    """check_equilibrium verdicts of one set across the whole sequence."""
    return {_label(n): check_equilibrium(seq.models[n], seq.D, seq.rewards[n], S, eps, grid, method).to_record()
            for n in seq.indices}
