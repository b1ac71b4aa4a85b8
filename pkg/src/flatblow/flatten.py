"""q-augmentation of flat slow manifolds.

A flat eigenvalue lambda(s), with every derivative vanishing at s = 0, is
promoted to a new state variable q.  Differentiating q = lambda(s) along the
base flow gives the q equation, and the graph Q = {q = lambda(s)} is invariant
for the extended field.  The three augmentations below share one builder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .odecore import OdeSystem, Trajectory

__all__ = [
    "FlatAugmentation",
    "extend_aircraft",
    "extend_kuehn",
    "extend_tanh",
    "flat_exp",
    "q_drift",
    "y_from_epshat",
]

_EXP_FLOOR = -800.0  # exp of anything below this is an exact 0.0


def flat_exp(c: float, s: float) -> float:
    """exp(-c/s) for s > 0, with the flat limit 0 at s <= 0 and underflow to 0."""
    if s <= 0.0:
        return 0.0
    return math.exp(max(-c / s, _EXP_FLOOR))


@dataclass(frozen=True)
class FlatAugmentation:
    base: OdeSystem
    lam: Callable[[float], float]
    lam_prime: Callable[[float], float]
    lam_name: str
    extended: OdeSystem
    slow_var: str
    q_var: str = "q"
    # prior multiplication of the field; None means the identity
    time_factor: Optional[Callable[[np.ndarray], float]] = None

    def q_constraint(self, z: np.ndarray) -> float:
        """q - lambda(s) at an extended state."""
        ext = self.extended
        return float(z[ext.index(self.q_var)] - self.lam(z[ext.index(self.slow_var)]))

    def q_constraint_rate(self, z: np.ndarray) -> float:
        """d/dt (q - lambda(s)) along the extended field, by the chain rule."""
        ext = self.extended
        f = ext(z)
        s = z[ext.index(self.slow_var)]
        return float(f[ext.index(self.q_var)] - self.lam_prime(s) * f[ext.index(self.slow_var)])

    def lift(self, x: np.ndarray) -> np.ndarray:
        """Base state to the extended state on Q."""
        x = np.asarray(x, dtype=float)
        vals = dict(zip(self.base.var_names, x))
        vals[self.q_var] = self.lam(vals[self.slow_var])
        return np.array([vals[n] for n in self.extended.var_names])

    def restrict(self, z: np.ndarray) -> np.ndarray:
        vals = dict(zip(self.extended.var_names, np.asarray(z, dtype=float)))
        return np.array([vals[n] for n in self.base.var_names])


def _build(name: str, base_vars: tuple[str, ...], ext_vars: tuple[str, ...], slow_var: str,
           lam: Callable[[float], float], lam_prime: Callable[[float], float], lam_name: str,
           base_rhs, ext_rhs, guard, params: dict) -> FlatAugmentation:
    base = OdeSystem(f"{name}.base", len(base_vars), base_rhs, params, guard, base_vars)
    ext = OdeSystem(f"{name}.ext", len(ext_vars), ext_rhs, params, guard, ext_vars)
    return FlatAugmentation(base, lam, lam_prime, lam_name, ext, slow_var)


def extend_kuehn(mu: float) -> FlatAugmentation:
    """Flat Kuehn model with q = exp(-1/y) on (x, y, q, eps)."""
    if mu == 0:
        raise ValueError("mu must be nonzero")

    def lam(y: float) -> float:
        return flat_exp(1.0, y)

    def lam_prime(y: float) -> float:
        return lam(y) / (y * y) if y > 0 else 0.0

    def base_rhs(z):
        x, y, eps = z
        q = lam(y)
        return np.array([eps * mu * q, y * y * (x - q), 0.0])

    def ext_rhs(z):
        x, y, q, eps = z
        return np.array([eps * mu * q, y * y * (x - q), q * (x - q), 0.0])

    return _build("kuehn", ("x", "y", "eps"), ("x", "y", "q", "eps"), "y", lam, lam_prime,
                  "exp(-1/y)", base_rhs, ext_rhs, lambda z: z[1] >= 0.0, {"mu": mu})


def extend_tanh() -> FlatAugmentation:
    """tanh regularization in the hat-y = infinity chart with q = exp(-2/hat-eps)."""

    def lam(e: float) -> float:
        return flat_exp(2.0, e)

    def lam_prime(e: float) -> float:
        return 2.0 * lam(e) / (e * e) if e > 0 else 0.0

    def base_rhs(z):
        x, e, eps = z
        return np.array([eps, -e * e * (2.0 * x + lam(e)), 0.0])

    def ext_rhs(z):
        x, e, q, eps = z
        return np.array([eps, -e * e * (2.0 * x + q), -2.0 * q * (2.0 * x + q), 0.0])

    return _build("tanh", ("x", "epshat", "eps"), ("x", "epshat", "q", "eps"), "epshat", lam,
                  lam_prime, "exp(-2/epshat)", base_rhs, ext_rhs, lambda z: z[1] >= 0.0, {})


def y_from_epshat(epshat: float, eps: float) -> float:
    """Undo the chart: y = eps / hat-eps."""
    if epshat <= 0:
        raise ValueError("hat-eps must be positive")
    return eps / epshat


def extend_aircraft(a: float, b: float, alpha: float) -> FlatAugmentation:
    """Aircraft model at v = -infinity with q = (1 + a y) exp(-b/y)."""
    if b <= 0:
        raise ValueError("b must be positive")

    def lam(y: float) -> float:
        return (1.0 + a * y) * flat_exp(b, y)

    def lam_prime(y: float) -> float:
        if y <= 0:
            return 0.0
        e = flat_exp(b, y)
        return a * e + (1.0 + a * y) * b * e / (y * y)

    def base_rhs(z):
        x, y, eps = z
        q = lam(y)
        return np.array([y * (eps * (1.0 + alpha * y) + x * (x - q)), y * y * (x - q), 0.0])

    def ext_rhs(z):
        x, y, q, eps = z
        B = b + a * y * y / (1.0 + a * y)
        return np.array([
            y * (eps * (1.0 + alpha * y) + x * (x - q)),
            y * y * (x - q),
            q * (x - q) * B,
            0.0,
        ])

    return _build("aircraft", ("x", "y", "eps"), ("x", "y", "q", "eps"), "y", lam, lam_prime,
                  "(1+a*y)*exp(-b/y)", base_rhs, ext_rhs, lambda z: 1.0 + a * z[1] > 0.0,
                  {"a": a, "b": b, "alpha": alpha})


def q_drift(aug: FlatAugmentation, trajectory: Trajectory, floor: float = 1e-300) -> float:
    """Largest relative violation |q - lambda| / (|q| + floor) along a trajectory."""
    qi = aug.extended.index(aug.q_var)
    worst = 0.0
    for z in trajectory.states:
        worst = max(worst, abs(aug.q_constraint(z)) / (abs(z[qi]) + floor))
    return worst
