"""Mild and epsilon-mild equilibria, the smallest equilibrium and the values V, V_eps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stopping_sets import StoppingSet
from .valuation import continuation_value, interval_values

TIE_TOL = 1e-9


class EquilibriumError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


@dataclass
class EquilibriumReport:
    set: StoppingSet
    epsilon: float
    verdict: bool
    worst_state: float | None
    worst_gap: float
    grid: np.ndarray = field(repr=False)

    def to_record(self) -> dict:
        return {
            "set": self.set.to_record(),
            "epsilon": self.epsilon,
            "verdict": self.verdict,
            "worst_violation": None if self.worst_state is None else {"state": self.worst_state, "gap": self.worst_gap},
            "grid": {"lo": float(self.grid[0]), "hi": float(self.grid[-1]), "n": int(self.grid.size)},
        }


def _spacing(grid) -> float:
    return float(np.min(np.diff(grid))) if grid.size > 1 else 1.0


def check_equilibrium(model, D, f, S: StoppingSet, eps: float, grid, method: str = "auto") -> EquilibriumReport:
    """Test f(x) <= J(x, S, f) + eps at the grid points outside S."""
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    grid = np.asarray(grid, dtype=float)
    outside = ~S.contains(grid)
    if not outside.any():
        return EquilibriumReport(S, eps, True, None, -math.inf, grid)
    J = continuation_value(model, D, f, S, grid[outside], method=method).values
    gap = f(grid[outside]) - J
    i = int(np.argmax(gap))
    worst = float(gap[i])
    return EquilibriumReport(S, eps, bool(worst <= eps + TIE_TOL), float(grid[outside][i]), worst, grid)


def _argmax_mask(vals):
    top = vals.max()
    return vals >= top - 1e-12 * max(1.0, abs(top))


def smallest_equilibrium(model, D, f, grid, strategy: str = "peak", max_iters: int | None = None,
                         method: str = "auto", return_trace: bool = False):
    """Grid-resolved smallest mild equilibrium by monotone expansion.

    Start from the grid argmax set of f and repeatedly add states where
    stopping beats continuing, f(x) > J(x, S_k, f) + 1e-9, until none remain.
    ``strategy="all"`` adds every violating grid point at once;
    ``strategy="peak"`` (default) adds only the largest violation of each
    connected run of violating points, which keeps point components such as
    {a, b} from being fattened by grid-wide bands.

    Returns the fixed point (and the iteration trace if requested).
    """
    if strategy not in ("peak", "all"):
        raise ValueError(f"unknown strategy {strategy!r}")
    grid = np.asarray(grid, dtype=float)
    h = _spacing(grid)
    fv = f(grid)
    trace = []
    if fv.max() <= 0:
        S = StoppingSet.empty()
        return (S, trace) if return_trace else S
    mask = _argmax_mask(fv)
    S = StoppingSet.from_mask(grid, mask, h)
    max_iters = max_iters or grid.size + 1
    for k in range(max_iters):
        inside = S.contains(grid)
        gap = np.full(grid.shape, -np.inf)
        out = ~inside
        if out.any():
            gap[out] = fv[out] - continuation_value(model, D, f, S, grid[out], method=method).values
        viol = gap > TIE_TOL
        trace.append({"iter": k, "set": str(S), "n_violations": int(viol.sum()),
                      "worst_gap": float(gap.max()) if out.any() else None})
        if not viol.any():
            return (S, trace) if return_trace else S
        if strategy == "all":
            add = viol
        else:
            add = np.zeros_like(viol)
            idx = np.flatnonzero(viol)
            runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
            for run in runs:
                add[run[np.argmax(gap[run])]] = True
        S = StoppingSet.from_mask(grid, inside | add, h)
    raise EquilibriumError(f"no fixed point after {max_iters} iterations", trace)


def minimality_probe(model, D, f, S: StoppingSet, grid, method: str = "auto") -> list:
    """For each component of S: True when deleting it breaks the equilibrium."""
    return [not check_equilibrium(model, D, f, S.without_component(i), 0.0, grid, method).verdict
            for i in range(len(S))]


def optimality_probe(model, D, f, S_star: StoppingSet, others, grid, method: str = "auto") -> float:
    """Smallest J(x, S*) - J(x, S) over the grid and the equilibria in ``others``."""
    J_star = continuation_value(model, D, f, S_star, grid, method=method).values
    worst = math.inf
    for S in others:
        if check_equilibrium(model, D, f, S, 0.0, grid, method).verdict:
            worst = min(worst, float(np.min(J_star - continuation_value(model, D, f, S, grid, method=method).values)))
    return worst


@dataclass
class ValueProfile:
    grid: np.ndarray
    V_values: np.ndarray
    attaining_sets: list
    epsilon: float = 0.0

    def to_rows(self):
        return [{"x": float(x), "V": float(v), "set": str(s)} for x, v, s in zip(self.grid, self.V_values, self.attaining_sets)]


def value_V(model, D, f, grid, S_star: StoppingSet | None = None, method: str = "auto", **kw) -> ValueProfile:
    """V(x) = J(x, S*, f) on the grid."""
    grid = np.asarray(grid, dtype=float)
    if S_star is None:
        S_star = smallest_equilibrium(model, D, f, grid, method=method, **kw)
    J = continuation_value(model, D, f, S_star, grid, method=method).values
    return ValueProfile(grid, J, [S_star] * grid.size, 0.0)


@dataclass
class EpsSearchConfig:
    """Candidate family for V_eps.

    ``grid`` is the check grid; interval-complement candidates X minus (l, r)
    use every ``stride``-th grid point (plus the boundary points of S* and the
    argmax of f) as endpoints, together with -inf and +inf.
    """

    grid: np.ndarray
    stride: int = 8
    method: str = "auto"
    S_star: StoppingSet | None = None


def _candidate_endpoints(cfg: EpsSearchConfig, S_star, f):
    g = np.asarray(cfg.grid, dtype=float)
    pts = set(g[:: max(1, cfg.stride)].tolist())
    pts.update(p for p in S_star.boundary_points() if g[0] <= p <= g[-1])
    fv = f(g)
    if fv.max() > 0:
        pts.update(g[_argmax_mask(fv)].tolist())
    return sorted(pts)


def epsilon_value_table(model, D, f, eps_list, xs, cfg: EpsSearchConfig):
    """V_eps(x) for every eps in ``eps_list`` and x in ``xs``.

    Returns (values[eps, x], sets[eps][x]).  The supremum runs over S*, the
    interval complements X minus (l, r) around x that pass the eps-check,
    and S* with one component deleted; it is a lower bound of the supremum
    over all closed sets.
    """
    grid = np.asarray(cfg.grid, dtype=float)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    eps_arr = np.asarray(eps_list, dtype=float)
    if np.any(eps_arr < 0):
        raise ValueError("epsilon must be nonnegative")
    S_star = cfg.S_star if cfg.S_star is not None else smallest_equilibrium(model, D, f, grid, method=cfg.method)
    best = np.tile(continuation_value(model, D, f, S_star, xs, method=cfg.method).values, (eps_arr.size, 1))
    sets = [[S_star] * xs.size for _ in eps_arr]

    def offer(S, gap, Jx, mask):
        ok = gap <= eps_arr + TIE_TOL
        for e in np.flatnonzero(ok):
            better = mask & (Jx > best[e] + 1e-15)
            if better.any():
                best[e, better] = Jx[better]
                for j in np.flatnonzero(better):
                    sets[e][j] = S

    # S* minus one component
    for i in range(len(S_star)):
        S = S_star.without_component(i)
        rep = check_equilibrium(model, D, f, S, 0.0, grid, cfg.method)
        Jx = continuation_value(model, D, f, S, xs, method=cfg.method).values
        offer(S, rep.worst_gap, Jx, np.ones(xs.size, dtype=bool))

    ends = _candidate_endpoints(cfg, S_star, f)
    lefts = [-math.inf] + ends
    rights = ends + [math.inf]
    fg = f(grid)
    lo_dom, hi_dom = model.domain
    for l in lefts:
        for r in rights:
            if not l < r:
                continue
            xm = (xs > l) & (xs < r)
            if not xm.any():
                continue
            gm = (grid > l) & (grid < r)
            pts = np.concatenate([grid[gm], xs[xm]])
            J = interval_values(model, D, f, l, r, pts, cfg.method)
            ng = int(gm.sum())
            gap = float(np.max(fg[gm] - J[:ng])) if ng else -math.inf
            Jx = np.zeros(xs.size)
            Jx[xm] = J[ng:]
            comps = []
            if l > lo_dom:
                comps.append((lo_dom, l))
            if r < hi_dom:
                comps.append((r, hi_dom))
            offer(StoppingSet(tuple(comps)), gap, Jx, xm)
    return best, sets


def value_V_eps(model, D, f, eps: float, x: float, search: EpsSearchConfig):
    """(V_eps(x), attaining set) over the candidate family of :func:`epsilon_value_table`."""
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    vals, sets = epsilon_value_table(model, D, f, [eps], [x], search)
    return float(vals[0, 0]), sets[0][0]
