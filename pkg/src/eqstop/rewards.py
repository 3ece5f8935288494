"""Piecewise reward functions f >= 0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Piece:
    """``fn`` on ``[lo, hi)``; the last piece of a reward is closed on the right."""

    lo: float
    hi: float
    fn: Callable
    kind: str = "tabulated"


@dataclass(frozen=True)
class RewardFunction:
    pieces: tuple
    sup: float
    lipschitz: float
    lipschitz_K: float
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        last = len(self.pieces) - 1
        for i, p in enumerate(self.pieces):
            m = (x >= p.lo) & ((x < p.hi) if i < last else (x <= p.hi))
            if np.any(m):
                out[m] = p.fn(x[m])
        return float(out) if out.ndim == 0 else out

    def shifted(self, shift: float) -> "RewardFunction":
        """x -> f(x - shift)."""
        pieces = tuple(
            Piece(p.lo + shift, p.hi + shift, (lambda fn: lambda x: fn(np.asarray(x) - shift))(p.fn), p.kind)
            for p in self.pieces
        )
        return RewardFunction(pieces, self.sup, self.lipschitz, self.lipschitz_K, dict(self.meta, shift=shift))


def make_reward(pieces, probe=None, continuity_tol: float = 1e-10, meta=None) -> RewardFunction:
    """Validate pieces on a probe grid and record sup-norm and Lipschitz bound.

    The pieces must tile an interval; outside it the reward is 0.
    """
    pieces = tuple(sorted(pieces, key=lambda p: p.lo))
    for p, q in zip(pieces, pieces[1:]):
        if p.hi != q.lo:
            raise ValueError("pieces must be contiguous")
        if math.isfinite(p.hi):
            left, right = float(p.fn(np.array([p.hi]))[0]), float(q.fn(np.array([q.lo]))[0])
            if abs(left - right) > continuity_tol:
                raise ValueError(f"reward discontinuous at {p.hi}: {left} vs {right}")
    f = RewardFunction(pieces, 0.0, 0.0, 0.0, dict(meta or {}))
    if probe is None:
        lo = pieces[0].lo if math.isfinite(pieces[0].lo) else -20.0
        hi = pieces[-1].hi if math.isfinite(pieces[-1].hi) else 20.0
        probe = np.linspace(lo, hi, 8001)
    probe = np.asarray(probe, dtype=float)
    vals = f(probe)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("reward must be finite and nonnegative")
    sup = float(np.max(np.abs(vals)))
    lip = float(np.max(np.abs(np.diff(vals)) / np.diff(probe))) if probe.size > 1 else 0.0
    return RewardFunction(pieces, sup, lip, sup + lip, dict(meta or {}))


def affine(slope: float, intercept: float) -> Callable:
    def fn(x):
        return slope * np.asarray(x, dtype=float) + intercept

    return fn


def zero_reward() -> RewardFunction:
    return RewardFunction((Piece(-math.inf, math.inf, affine(0.0, 0.0), "affine"),), 0.0, 0.0, 0.0)


def tent_reward(height: float, center: float = 0.0) -> RewardFunction:
    """Unit-slope tent of the given height centred at ``center``, zero elsewhere."""
    c, a = center, height
    pieces = [
        Piece(-math.inf, c - a, affine(0.0, 0.0), "affine"),
        Piece(c - a, c, affine(1.0, a - c), "affine"),
        Piece(c, c + a, affine(-1.0, a + c), "affine"),
        Piece(c + a, math.inf, affine(0.0, 0.0), "affine"),
    ]
    probe = np.linspace(c - 3 * a, c + 3 * a, 6001)
    return make_reward(pieces, probe, meta={"kind": "tent", "height": a, "center": c})


def tabulated_reward(xs, ys) -> RewardFunction:
    """Linear interpolation of (xs, ys), constant beyond the ends."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)

    def fn(x):
        return np.interp(x, xs, ys)

    return make_reward([Piece(-math.inf, math.inf, fn, "tabulated")], probe=xs)
