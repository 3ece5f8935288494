"""One-dimensional diffusions dX = mu(X) dt + sigma(X) dW and hitting-time transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "tanh", "sinh", "cosh", "exp", "log", "sqrt", "abs", "arctan", "pi")
}


def _compile_expr(expr: str) -> Callable:
    code = compile(expr, "<coefficient>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name != "x":
            raise ValueError(f"name {name!r} not allowed in coefficient expression {expr!r}")

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eval(code, {"__builtins__": {}}, dict(_EXPR_NAMESPACE, x=x)), x.shape).astype(float)

    fn.expr = expr
    return fn


def _constant_fn(value: float) -> Callable:
    def fn(x):
        return np.full(np.shape(x), value, dtype=float)

    return fn


@dataclass(frozen=True)
class DiffusionModel:
    """Regular diffusion Q = (mu, sigma) on an open interval.

    ``mu`` and ``sigma`` must accept numpy arrays.  Bounds and Lipschitz
    quotients are measured on a probe grid when the model is built through
    :func:`general_model`; ``constant`` is set for Brownian motion with drift,
    which enables the closed-form hitting transforms.
    """

    domain: tuple
    mu: Callable
    sigma: Callable
    mu_bound: float
    sigma_bound: float
    ellipticity_L: float
    constant: tuple | None = None
    lipschitz: dict = field(default_factory=dict, compare=False)
    exprs: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("domain must be a nonempty open interval")
        if not self.ellipticity_L > 0:
            raise ValueError("ellipticity bound L must be positive")

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def contains(self, x) -> np.ndarray:
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        return (x > lo) & (x < hi)

    def to_record(self) -> dict:
        dom = [_enc(self.domain[0]), _enc(self.domain[1])]
        if self.constant is not None:
            return {"kind": "constant", "domain": dom, "mu": self.constant[0], "sigma": self.constant[1]}
        rec = {"kind": "general", "domain": dom}
        if self.exprs:
            rec["mu"], rec["sigma"] = self.exprs
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "DiffusionModel":
        dom = tuple(_dec(v) for v in rec.get("domain", ["-inf", "inf"]))
        if rec["kind"] == "constant":
            return constant_model(float(rec["mu"]), float(rec.get("sigma", 1.0)), domain=dom)
        if rec["kind"] == "general":
            return general_model(_compile_expr(rec["mu"]), _compile_expr(rec["sigma"]), domain=dom,
                                 exprs=(rec["mu"], rec["sigma"]))
        raise ValueError(f"unknown model kind {rec['kind']!r}")


def _enc(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _dec(v) -> float:
    return float(v)


def constant_model(mu0: float = 0.0, sigma0: float = 1.0, domain=(-math.inf, math.inf)) -> DiffusionModel:
    if sigma0 == 0:
        raise ValueError("sigma must be nonzero")
    return DiffusionModel(
        domain=tuple(domain),
        mu=_constant_fn(mu0),
        sigma=_constant_fn(sigma0),
        mu_bound=abs(mu0),
        sigma_bound=abs(sigma0),
        ellipticity_L=sigma0 * sigma0,
        constant=(float(mu0), float(sigma0)),
        lipschitz={"mu": 0.0, "sigma": 0.0},
    )


def general_model(mu, sigma, domain=(-math.inf, math.inf), probe=None, exprs=None) -> DiffusionModel:
    """Build a model with state-dependent coefficients, measuring bounds on ``probe``."""
    if probe is None:
        lo = domain[0] if math.isfinite(domain[0]) else -50.0
        hi = domain[1] if math.isfinite(domain[1]) else 50.0
        probe = np.linspace(lo, hi, 4003)[1:-1]
    probe = np.asarray(probe, dtype=float)
    m, s = mu(probe), sigma(probe)
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
        raise ValueError("coefficients not finite on probe grid")
    dx = np.diff(probe)
    lip = {
        "mu": float(np.max(np.abs(np.diff(m)) / dx)),
        "sigma": float(np.max(np.abs(np.diff(s)) / dx)),
    }
    return DiffusionModel(
        domain=tuple(domain),
        mu=mu,
        sigma=sigma,
        mu_bound=float(np.max(np.abs(m))),
        sigma_bound=float(np.max(np.abs(s))),
        ellipticity_L=float(np.min(s * s)),
        lipschitz=lip,
        exprs=exprs,
    )


def exponents(model: DiffusionModel, lam):
    """(theta, kappa) with E-transform solutions exp((theta +/- kappa) x).

    theta = -mu/sigma^2 and kappa = sqrt(mu^2 + 2 lam sigma^2)/sigma^2, so the
    unit-volatility case reduces to theta = -mu0, kappa = sqrt(2 lam + mu0^2).
    """
    if model.constant is None:
        raise NotImplementedError("closed forms need constant coefficients")
    mu0, s0 = model.constant
    v = s0 * s0
    lam = np.asarray(lam, dtype=float)
    return -mu0 / v, np.sqrt(mu0 * mu0 + 2.0 * lam * v) / v


def _one_barrier(model, x, b, lam):
    theta, kappa = exponents(model, lam)
    d = np.asarray(x, dtype=float) - b
    return np.exp(theta * d - kappa * np.abs(d))


def _two_barrier(model, x, a, b, lam):
    theta, kappa = exponents(model, lam)
    x = np.asarray(x, dtype=float)
    L = b - a
    kl = kappa * L
    with np.errstate(invalid="ignore", divide="ignore"):
        den = -np.expm1(-2.0 * kl)
        psi_a = np.exp(theta * (x - a) - kappa * (x - a)) * (-np.expm1(-2.0 * kappa * (b - x))) / den
        psi_b = np.exp(theta * (x - b) - kappa * (b - x)) * (-np.expm1(-2.0 * kappa * (x - a))) / den
    flat = kl == 0
    if np.any(flat):
        # kappa = 0 only for driftless motion at rate 0: hitting probabilities are linear
        psi_a = np.where(flat, (b - x) / L, psi_a)
        psi_b = np.where(flat, (x - a) / L, psi_b)
    return psi_a, psi_b


def laplace_one_barrier(model: DiffusionModel, x, b: float, lam):
    """E_x[exp(-lam * rho_b)] for Brownian motion with constant drift and volatility."""
    if np.any(np.asarray(lam) <= 0):
        raise ValueError("lambda must be positive")
    out = _one_barrier(model, x, b, lam)
    return float(out) if np.ndim(out) == 0 else out


def laplace_two_barrier(model: DiffusionModel, x, a: float, b: float, lam):
    """(psi_a, psi_b): E_x[exp(-lam rho); exit at a] and the same for b, a <= x <= b."""
    if not a < b:
        raise ValueError("need a < b")
    if np.any(np.asarray(lam) <= 0):
        raise ValueError("lambda must be positive")
    xa = np.asarray(x, dtype=float)
    if np.any((xa < a) | (xa > b)):
        raise ValueError("x must lie in [a, b]")
    pa, pb = _two_barrier(model, xa, a, b, lam)
    if np.ndim(pa) == 0:
        return float(pa), float(pb)
    return pa, pb
