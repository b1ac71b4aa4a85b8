"""Closed-form predictions, special functions and the eta(n) shooting oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .odecore import EventSpec, IntegratorConfig, OdeSystem, integrate

__all__ = [
    "DomainError",
    "EtaResult",
    "Prediction",
    "bonet_cx",
    "bonet_prefactor",
    "bonet_y_theta",
    "erf",
    "erfc",
    "erfcx",
    "eta_oracle",
    "fiber_inverse",
    "fiber_transform",
    "fiber_w",
    "kuehn_predictions",
    "m2",
    "s3",
    "s3_naive",
    "tanh_exact_solution",
    "tanh_seed_x",
    "tanh_y_theta",
    "tilde_eps_inverse_m2",
    "y2_closed_form",
    "y2_rhs",
    "yM2_eps_hat",
]

_SQRT_PI = math.sqrt(math.pi)


class DomainError(ValueError):
    """Argument outside the domain where a closed form is defined."""


@dataclass(frozen=True)
class Prediction:
    value: float
    error_order: str
    inputs: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise DomainError(f"prediction is not finite: {self.value}")

    def __float__(self) -> float:
        return self.value


# error function family --------------------------------------------------

def _erf_series(u: float) -> float:
    # erf(u) = 2u/sqrt(pi) e^{-u^2} sum_k (2u^2)^k / (1*3*...*(2k+1)); all terms positive
    t = 2.0 * u * u
    term = 1.0
    total = 1.0
    k = 0
    while term > 1e-17 * total:
        k += 1
        term *= t / (2 * k + 1)
        total += term
    return 2.0 * u / _SQRT_PI * math.exp(-u * u) * total


def _erfcx_cf(u: float) -> float:
    # Laplace continued fraction in its even contraction, modified Lentz; u >= 1
    tiny = 1e-300
    f = 2.0 * u * u + 1.0
    c, d = f, 0.0
    for n in range(1, 5000):
        a = -(2.0 * n - 1.0) * (2.0 * n)
        b = 2.0 * u * u + 1.0 + 4.0 * n
        d = b + a * d
        d = 1.0 / (d if d != 0.0 else tiny)
        c = b + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 5e-17:
            break
    return 2.0 * u / (f * _SQRT_PI)


def _erfcx_pos(u: float) -> float:
    if u < 1.0:
        return math.exp(u * u) * (1.0 - _erf_series(u))
    if u > 1e8:
        # leading asymptotics; the continued fraction would return the same to rounding
        return 1.0 / (u * _SQRT_PI) * (1.0 - 0.5 / (u * u))
    return _erfcx_cf(u)


def _erf_scalar(u: float) -> float:
    if math.isnan(u):
        return math.nan
    a = abs(u)
    if a < 1.0:
        return _erf_series(u)
    if a > 27.0:
        return math.copysign(1.0, u)
    val = 1.0 - _erfcx_pos(a) * math.exp(-a * a)
    return math.copysign(val, u)


def _erfc_scalar(u: float) -> float:
    if math.isnan(u):
        return math.nan
    if u < 1.0:
        return 1.0 - _erf_scalar(u)
    if u > 27.3:
        return 0.0
    return _erfcx_pos(u) * math.exp(-u * u)


def _erfcx_scalar(u: float) -> float:
    if math.isnan(u):
        return math.nan
    if u >= 0.0:
        return _erfcx_pos(u)
    if u < -26.7:
        return math.inf
    return 2.0 * math.exp(u * u) - _erfcx_pos(-u)


def _vectorize(fn):
    vec = np.vectorize(fn, otypes=[float])

    def wrapped(u):
        if np.ndim(u) == 0:
            return fn(float(u))
        return vec(np.asarray(u, dtype=float))

    wrapped.__name__ = fn.__name__.strip("_").replace("_scalar", "")
    wrapped.__doc__ = fn.__doc__
    return wrapped


erf = _vectorize(_erf_scalar)
erfc = _vectorize(_erfc_scalar)
erfcx = _vectorize(_erfcx_scalar)
erf.__doc__ = "Gauss error function."
erfc.__doc__ = "Complementary error function 1 - erf(u)."
erfcx.__doc__ = "Scaled complementary error function exp(u^2) erfc(u), overflow free for u >= 0."


# tanh regularization -----------------------------------------------------

def tanh_y_theta(theta: float, eps: float, published: bool = True) -> Prediction:
    """Height of the slow manifold of the tanh-regularized fold at ``x = theta``.

    ``published=True`` gives theta^2 + eps/4 ln(pi/(2 eps)).  The exact orbit
    tends to theta^2 + eps/4 ln(2 pi/eps) for theta > 0; the published constant
    is its value at x = 0.  ``published=False`` returns the limit of the exact orbit.
    """
    if not (0.0 < eps < 1.0):
        raise DomainError("eps must lie in (0, 1)")
    if theta <= 0:
        raise DomainError("theta must be positive")
    const = math.pi / (2.0 * eps) if published else 2.0 * math.pi / eps
    value = theta * theta + eps * 0.25 * math.log(const)
    return Prediction(value, "eps*R(sqrt(eps)), R = O(exp(-c/eps))", {"theta": theta, "eps": eps})


def tanh_exact_solution(x: float, eps: float, C: float = 1.0) -> float:
    """Exact orbit of dy/dx = 2x + exp(-2y/eps); ``C = 1`` is the slow manifold."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    s = math.sqrt(2.0 / eps) * x
    pref = math.sqrt(math.pi / (2.0 * eps))
    if C == 1.0 and s < 0.0:
        # 1 + erf(s) = erfcx(-s) exp(-s^2); the exp(-s^2) cancels x^2 exactly
        return 0.5 * eps * math.log(pref * _erfcx_scalar(-s))
    arg = pref * (_erf_scalar(s) + C)
    if arg <= 0.0:
        raise DomainError("logarithm argument is not positive (orbit has blown down)")
    return x * x + 0.5 * eps * math.log(arg)


def tanh_seed_x(xi: float, eps: float) -> float:
    """First-order slow-manifold point on the section ``hat y = 1/xi`` of the tanh fold."""
    return -0.5 * math.exp(-2.0 / xi) + 0.5 * eps * math.exp(2.0 / xi)


# C_ST regularization, fold passage ---------------------------------------

def bonet_prefactor(n: int, phi_n: float) -> float:
    """(2/phi_n)^(2/(2n-1)), the squared scale of ``bonet_cx(published=True)``."""
    return (2.0 / phi_n) ** (2.0 / (2 * n - 1))


def bonet_cx(n: int, phi_n: float, published: bool = True) -> float:
    """Scale between the chart variable and the eta(n) normal form.

    ``published=True`` returns (2/phi_n)^(1/(2n-1)).  Rescaling the chart
    equation x2' = 1, y2' = 2 x2 + phi_n/2 (-y2)^n onto u' = 1, v' = -u - v^n
    actually requires (2^(2-n)/phi_n)^(1/(2n-1)); ``published=False`` gives that.
    """
    if n < 2 or phi_n <= 0:
        raise DomainError("need n >= 2 and phi_n > 0")
    num = 2.0 if published else 2.0 ** (2 - n)
    return (num / phi_n) ** (1.0 / (2 * n - 1))


def bonet_y_theta(n: int, phi_n: float, theta: float, eps: float, eta: float,
                  published: bool = True) -> Prediction:
    """Slow-manifold height at ``x = theta`` for a C_ST^(n-1) regularization."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    r2 = eps ** (1.0 / (2 * n - 1))
    x_eps = r2**n * bonet_cx(n, phi_n, published) * eta
    value = theta * theta + eps - x_eps * x_eps
    return Prediction(value, "O(r2^(2n+1)), r2 = eps^(1/(2n-1))",
                      {"n": n, "phi_n": phi_n, "theta": theta, "eps": eps, "eta": eta})


@dataclass(frozen=True)
class EtaResult:
    value: float
    L: float
    log: tuple[tuple[float, float], ...]


def _eta_at(n: int, L: float) -> float:
    def rhs(z: np.ndarray) -> np.ndarray:
        v = z[1]
        return np.array([1.0, -z[0] - v**n])

    sys_ = OdeSystem("eta_normal_form", 2, rhs, {"n": n}, var_names=("u", "v"))
    hit = EventSpec(lambda z: z[1], direction="falling", terminal=True, tol_event=1e-14)
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, method="radau5", max_steps=500_000)
    tr = integrate(sys_, [-L, L ** (1.0 / n)], (0.0, 2.0 * L + 50.0), cfg, [hit])
    if tr.status != "terminated_by_event":
        raise RuntimeError(f"eta oracle: no crossing of v = 0 (status {tr.status})")
    return float(tr.x_final[0])


def eta_oracle(n: int, L0: float = 64.0, tol: float = 1e-8, L_max: float = 512.0) -> EtaResult:
    """Crossing u = eta(n) of v = 0 by the attracting solution of u' = 1, v' = -u - v^n.

    The solution is started on v = (-u)^(1/n) at u = -L and L is doubled until
    the crossing changes by less than ``tol``.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    L = L0
    log = [(L, _eta_at(n, L))]
    while L < L_max:
        L *= 2.0
        log.append((L, _eta_at(n, L)))
        if abs(log[-1][1] - log[-2][1]) < tol:
            return EtaResult(log[-1][1], L, tuple(log))
    raise RuntimeError(f"eta oracle did not converge up to L = {L_max}: {log}")


# chart kappa_2 / kappa_3 objects of the tanh analysis ------------------

def m2(x: float) -> float:
    """Orbit q2 = m2(x2) of dq2/dx2 = -2 q2 (2 x2 + q2) through the kappa_1 critical curve."""
    s = math.sqrt(2.0) * x
    if x < 0.0:
        # 1 + erf(s) = erfcx(-s) exp(-s^2) and exp(-2x^2) = exp(-s^2)
        return 2.0 / (math.sqrt(2.0 * math.pi) * _erfcx_scalar(-s))
    return 2.0 * math.exp(-2.0 * x * x) / (math.sqrt(2.0 * math.pi) * (1.0 + _erf_scalar(s)))


def s3(eps3: float) -> float:
    """sqrt(2 pi/eps3) exp(2/eps3) erfc(sqrt(2/eps3)), evaluated through erfcx."""
    if eps3 <= 0:
        raise DomainError("eps3 must be positive")
    return math.sqrt(2.0 * math.pi / eps3) * _erfcx_scalar(math.sqrt(2.0 / eps3))


def s3_naive(eps3: float) -> float:
    """Direct evaluation of the same expression; overflows for small eps3."""
    u = math.sqrt(2.0 / eps3)
    return math.sqrt(2.0 * math.pi / eps3) * math.exp(u * u) * (1.0 - _erf_scalar(u))


def fiber_w(q3: float, eps3: float) -> float:
    arg = 1.0 + 0.5 * q3 * s3(eps3)
    if arg <= 0:
        raise DomainError("1 + q3 S3/2 must be positive")
    return -0.5 * math.log(arg)


def fiber_transform(eps_breve: float, q3: float, eps3: float) -> float:
    """Map the straightened coordinate to hat-eps: eps_breve / (1 + eps_breve W)."""
    den = 1.0 + eps_breve * fiber_w(q3, eps3)
    if den <= 0:
        raise DomainError("nonpositive denominator in fiber transform")
    return eps_breve / den


def fiber_inverse(eps_hat: float, q3: float, eps3: float) -> float:
    den = 1.0 - eps_hat * fiber_w(q3, eps3)
    if den <= 0:
        raise DomainError("nonpositive denominator in inverse fiber transform")
    return eps_hat / den


def yM2_eps_hat(eta: float, eps: float) -> float:
    """hat-eps where the kappa_2 manifold meets x2 = eta^(-1/2)."""
    inv = 0.25 * math.log(1.0 / eps) + 1.0 / eta + 0.5 * math.log(
        math.sqrt(2.0 * math.pi) / 2.0 * (1.0 + _erf_scalar(math.sqrt(2.0 / eta)))
    )
    return 1.0 / inv


def tilde_eps_inverse_m2(eta: float, eps: float) -> float:
    """1/eps_breve at the same point, computed through the fiber map with q2 = m2(x2)."""
    x2 = eta**-0.5
    q3 = m2(x2) / x2
    eps_hat = yM2_eps_hat(eta, eps)
    return 1.0 / fiber_inverse(eps_hat, q3, x2**-2)


# aircraft delayed stability --------------------------------------------

def y2_rhs(x2: float, y: float, alpha: float) -> float:
    """dy/dx2 along q2 = 0 of the aircraft scaling chart."""
    return y * x2 / (1.0 + x2 * x2 + alpha * y)


def y2_closed_form(x2: float, y0: float, alpha: float, published: bool = False) -> float:
    """Solution of dy/dx2 = y x2/(1 + x2^2 + alpha y) with y(0) = y0.

    ``published=True`` evaluates the displayed formula, whose radicand carries
    x2^2 (2 alpha + 1); integrating the ODE gives x2^2 (1 + 2 alpha y0) instead,
    which is the default.  Both agree for alpha = 0.
    """
    if y0 <= 0:
        raise DomainError("y0 must be positive")
    k = (2.0 * alpha + 1.0) if published else (1.0 + 2.0 * alpha * y0)
    rad = (alpha * y0 + 1.0) ** 2 + x2 * x2 * k
    if rad < 0:
        raise DomainError("negative radicand")
    return y0 * (math.sqrt(rad) + alpha * y0) / (1.0 + 2.0 * alpha * y0)


# Kuehn model -------------------------------------------------------------

def kuehn_predictions(mu: float, eps1: float, n: int = 2) -> dict[str, Prediction | tuple[float, float] | str]:
    """Center-manifold value in chart kappa_1 and the two scaling laws.

    ``x1_center`` is the leading-order center manifold 1 + mu eps1 obtained from
    the kappa_1 equations; ``x1_published`` is the displayed 1 - mu eps1.
    """
    if mu == 0:
        raise DomainError("mu must be nonzero")
    return {
        "x1_center": Prediction(1.0 + mu * eps1, "O(eps1^2)", {"mu": mu, "eps1": eps1}),
        "x1_published": Prediction(1.0 - mu * eps1, "O(eps1^2)", {"mu": mu, "eps1": eps1}),
        "algebraic_scaling": (n / (n + 1.0), 1.0 / (n + 1.0)),
        "flat_scaling": "(x, y) = (O(eps), O(1/ln(1/eps)))",
    }
