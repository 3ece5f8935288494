"""Weighted discount functions delta(t) = int exp(-r t) F(dr).

A :class:`DiscountMeasure` stores the rate distribution ``F`` as a finite set
of (rate, weight) pairs: point masses (``atoms``) plus quadrature nodes that
discretize any continuous part.  Every valuation in the package is an
average over these rates, so the same object drives closed forms, the ODE
engine and the Monte Carlo oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

MASS_TOL = 1e-12
CLOSED_FORM_TOL = 1e-8

# exp-sinh window: s = exp(pi/2 sinh(v)) for v in [V_LO, V_HI] covers
# s in [~1e-14, ~51], enough for e^{-s} tails and for t up to ~1e4.
_V_LO = -3.75
_V_HI = 1.65


@dataclass(frozen=True)
class DiscountMeasure:
    """Rate distribution of a weighted discount function.

    Parameters
    ----------
    atoms : tuple of (rate, weight)
        Point masses of ``F``.  Rates >= 0, weights in (0, 1].
    quad_nodes : tuple of (rate, weight)
        Quadrature discretization of the continuous part of ``F``.
    closed_form : dict, optional
        Exact description, e.g. ``{"kind": "hyperbolic", "beta": 1.0}``.
    """

    atoms: tuple = ()
    quad_nodes: tuple = ()
    closed_form: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        rates, weights = self.rates, self.weights
        if rates.size == 0:
            raise ValueError("discount measure has no mass")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise ValueError("rates must be finite and nonnegative")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        for r, w in self.atoms:
            if w > 1:
                raise ValueError(f"atom weight {w} exceeds 1")
        total = math.fsum(weights)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([r for r, _ in self.atoms] + [r for r, _ in self.quad_nodes], dtype=float)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms] + [w for _, w in self.quad_nodes], dtype=float)

    @property
    def n_rates(self) -> int:
        return len(self.atoms) + len(self.quad_nodes)

    def has_atom_at_zero(self) -> bool:
        """True when F(0) > 0, i.e. delta does not vanish at infinity."""
        return any(r == 0 for r, _ in self.atoms)

    def to_record(self) -> dict:
        if self.closed_form and self.closed_form.get("kind") == "hyperbolic":
            return {"kind": "hyperbolic", "beta": self.closed_form["beta"], "nodes": len(self.quad_nodes)}
        return {
            "kind": "table",
            "atoms": [[float(r), float(w)] for r, w in self.atoms],
            "quad_nodes": [[float(r), float(w)] for r, w in self.quad_nodes],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "DiscountMeasure":
        kind = rec.get("kind")
        if kind == "hyperbolic":
            return hyperbolic_measure(float(rec["beta"]), int(rec.get("nodes", 64)))
        if kind == "table":
            atoms = tuple((float(r), float(w)) for r, w in rec.get("atoms", []))
            nodes = tuple((float(r), float(w)) for r, w in rec.get("quad_nodes", []))
            return cls(atoms=atoms, quad_nodes=nodes)
        raise ValueError(f"unknown discount kind {kind!r}")


def _check_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("discount evaluated at negative time")
    return t


def eval_delta_quadrature(D: DiscountMeasure, t):
    """delta(t) from the stored rates, ignoring any closed form."""
    t = _check_time(t)
    r, w = D.rates, D.weights
    out = np.exp(-np.multiply.outer(t, r)) @ w
    out = np.where(t == 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def eval_delta(D: DiscountMeasure, t):
    """Evaluate delta(t); uses the exact formula when the measure carries one.

    ``t = inf`` gives 0 (provided there is no atom at rate 0).
    """
    t = _check_time(t)
    cf = D.closed_form
    if cf and cf.get("kind") == "hyperbolic":
        with np.errstate(divide="ignore"):
            out = 1.0 / (1.0 + cf["beta"] * t)
        return float(out) if out.ndim == 0 else out
    return eval_delta_quadrature(D, t)


def hyperbolic_measure(beta: float, n_nodes: int = 64) -> DiscountMeasure:
    """Quadrature measure for delta(t) = 1/(1 + beta t).

    Uses 1/(1+beta t) = int_0^inf e^{-s} e^{-beta s t} ds, i.e. rates
    r = beta*s with s ~ Exp(1).  The s-integral is discretized by an
    exp-sinh trapezoid rule, which stays accurate both for large t (mass
    concentrated at tiny s) and for integrands with sqrt(s) behaviour at 0
    (one-barrier Laplace transforms).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if n_nodes < 1:
        raise ValueError("need at least one node")
    if n_nodes == 1:
        s = np.array([1.0])
        w = np.array([1.0])
    else:
        v = np.linspace(_V_LO, _V_HI, n_nodes)
        h = v[1] - v[0]
        e = 0.5 * np.pi * np.sinh(v)
        s = np.exp(e)
        w = np.exp(-s) * s * 0.5 * np.pi * np.cosh(v) * h
        w = w / math.fsum(w)
    nodes = tuple((float(beta * si), float(wi)) for si, wi in zip(s, w))
    return DiscountMeasure(quad_nodes=nodes, closed_form={"kind": "hyperbolic", "beta": float(beta)})


def check_decreasing_impatience(D: DiscountMeasure, pairs) -> tuple[bool, float]:
    """Check delta(t+s) >= delta(t) delta(s) on a finite set of (t, s) pairs.

    Returns the verdict and the smallest margin delta(t+s) - delta(t)delta(s).
    """
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    t, s = pairs[:, 0], pairs[:, 1]
    margin = np.asarray(eval_delta(D, t + s)) - np.asarray(eval_delta(D, t)) * np.asarray(eval_delta(D, s))
    worst = float(np.min(margin)) if margin.size else 0.0
    return bool(worst >= -1e-12), worst
