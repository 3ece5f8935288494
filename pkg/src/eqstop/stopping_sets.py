"""Closed stopping sets as finite unions of disjoint closed intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_COMPONENTS = 64


@dataclass(frozen=True)
class StoppingSet:
    """Sorted disjoint closed intervals ``[l_i, r_i]``; points have ``l_i == r_i``.

    Infinite endpoints stand for half-lines closed in the state space, e.g.
    ``(1.0, inf)`` is ``[1, inf)``.
    """

    components: tuple = ()

    def __post_init__(self):
        comps = tuple((float(l), float(r)) for l, r in self.components)
        for l, r in comps:
            if math.isnan(l) or math.isnan(r) or l > r:
                raise ValueError(f"bad component [{l}, {r}]")
        for (_, r0), (l1, _) in zip(comps, comps[1:]):
            if not r0 < l1:
                raise ValueError("components must be sorted with strict gaps")
        if len(comps) > MAX_COMPONENTS:
            raise ValueError(f"more than {MAX_COMPONENTS} components")
        object.__setattr__(self, "components", comps)

    @classmethod
    def empty(cls) -> "StoppingSet":
        return cls(())

    @classmethod
    def points(cls, *pts) -> "StoppingSet":
        return cls(tuple((p, p) for p in sorted(pts)))

    @classmethod
    def whole(cls, domain) -> "StoppingSet":
        return cls(((domain[0], domain[1]),))

    @classmethod
    def from_mask(cls, grid, mask, h: float | None = None) -> "StoppingSet":
        """Snap a boolean mask on a sorted grid to components.

        Runs of marked points closer than 2h are merged; isolated marked points
        become degenerate intervals.
        """
        grid = np.asarray(grid, dtype=float)
        mask = np.asarray(mask, dtype=bool)
        if h is None:
            h = float(np.min(np.diff(grid))) if grid.size > 1 else 1.0
        pts = grid[mask]
        if pts.size == 0:
            return cls.empty()
        comps = []
        l = r = pts[0]
        for p in pts[1:]:
            if p - r < 1.5 * h:
                r = p
            else:
                comps.append((l, r))
                l = r = p
        comps.append((l, r))
        return cls(tuple(comps))

    @property
    def is_empty(self) -> bool:
        return not self.components

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for l, r in self.components:
            out |= (x >= l - tol) & (x <= r + tol)
        return out

    def complement_intervals(self, domain) -> list:
        """Open intervals making up ``domain`` minus the set, left to right."""
        lo, hi = domain
        out = []
        cur = lo
        for l, r in self.components:
            if l > cur:
                out.append((cur, min(l, hi)))
            cur = max(cur, r)
            if cur >= hi:
                break
        if cur < hi:
            out.append((cur, hi))
        return [(a, b) for a, b in out if a < b]

    @classmethod
    def from_complement(cls, intervals, domain) -> "StoppingSet":
        """Inverse of :meth:`complement_intervals`."""
        lo, hi = domain
        intervals = sorted(intervals)
        if not intervals:
            return cls.whole(domain)
        comps = []
        if intervals[0][0] > lo:
            comps.append((lo, intervals[0][0]))
        for (_, b0), (a1, _) in zip(intervals, intervals[1:]):
            comps.append((b0, a1))
        if intervals[-1][1] < hi:
            comps.append((intervals[-1][1], hi))
        return cls(tuple(comps))

    def without_component(self, i: int) -> "StoppingSet":
        return StoppingSet(self.components[:i] + self.components[i + 1:])

    def union(self, other: "StoppingSet") -> "StoppingSet":
        comps = sorted(self.components + other.components)
        merged = []
        for l, r in comps:
            if merged and l <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(r, merged[-1][1]))
            else:
                merged.append((l, r))
        return StoppingSet(tuple(merged))

    def boundary_points(self) -> list:
        pts = []
        for l, r in self.components:
            pts.extend([l] if l == r else [l, r])
        return [p for p in pts if math.isfinite(p)]

    def to_record(self) -> list:
        return [[_enc(l), _enc(r)] for l, r in self.components]

    @classmethod
    def from_record(cls, rec) -> "StoppingSet":
        return cls(tuple((float(l), float(r)) for l, r in rec))

    def approx_equal(self, other: "StoppingSet", tol: float) -> bool:
        """Componentwise equality of endpoints within ``tol``."""
        if len(self) != len(other):
            return False
        for (l0, r0), (l1, r1) in zip(self, other):
            for u, v in ((l0, l1), (r0, r1)):
                if math.isinf(u) or math.isinf(v):
                    if u != v:
                        return False
                elif abs(u - v) > tol:
                    return False
        return True

    def __str__(self) -> str:
        if self.is_empty:
            return "{}"
        parts = [f"{{{l:g}}}" if l == r else f"[{l:g}, {r:g}]" for l, r in self.components]
        return " u ".join(parts)


def _enc(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def set_liminf_limsup(sets, probe_grid, h: float | None = None):
    """Grid-restricted lim inf / lim sup of a finite sequence of sets.

    Membership of a grid point in ``A_k`` uses snap tolerance h/2.  A finite
    sequence has no genuine tail, so "eventually" and "infinitely often" are
    read on the tail ``T`` made of the second half of the indices (at least
    two indices when available):

    * lim inf: points lying in every ``A_k``, k in T;
    * lim sup: points of the union over T that occur in at least two sets
      of the sequence (one when the sequence has a single set).

    A point set drifting across the grid, such as ``{1/n}``, therefore has an
    empty lim sup, while constant and periodic sequences behave as for
    infinite sequences.
    """
    sets = list(sets)
    if not sets:
        raise ValueError("empty sequence of sets")
    grid = np.asarray(probe_grid, dtype=float)
    if h is None:
        h = float(np.min(np.diff(grid))) if grid.size > 1 else 1.0
    member = np.array([s.contains(grid, tol=0.5 * h) for s in sets])
    N = len(sets)
    start = min(N // 2, max(N - 2, 0))
    tail = member[start:]
    liminf = tail.all(axis=0)
    counts = member.sum(axis=0)
    limsup = tail.any(axis=0) & (counts >= min(2, N))
    return StoppingSet.from_mask(grid, liminf, h), StoppingSet.from_mask(grid, limsup, h)
