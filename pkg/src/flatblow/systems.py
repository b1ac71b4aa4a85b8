"""Model catalog: vector fields, critical manifolds, eigenvalues and chart pairs.

Three families are covered:

* the Kuehn model, algebraic and flat variants;
* a planar visible fold with Filippov sliding and its smooth regularizations
  (the cubic C_ST^1 function and tanh);
* the minimal aircraft ground-dynamics model.

Every chart-local field is registered together with its ambient parent in
:func:`chart_pairs`, so the desingularization checker can guard transcriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .charts import BlowupSpec, Chart, DesingularizedField
from .flatten import extend_aircraft, extend_kuehn, extend_tanh, flat_exp
from .odecore import EventSpec, IntegratorConfig, OdeSystem, Trajectory, integrate

__all__ = [
    "AircraftParams",
    "ChartPair",
    "KuehnParams",
    "OffManifoldError",
    "PwsParams",
    "REGISTRY",
    "aircraft_fields",
    "chart_pairs",
    "critical_point",
    "eigenvalue_along_manifold",
    "filippov_classify",
    "filippov_sliding_rhs",
    "get_system",
    "kuehn_fields",
    "layer_fast_indices",
    "phi",
    "phi_bracket",
    "pws_flow",
    "regularized_fields",
    "tanh_chart_fields",
]


class OffManifoldError(ValueError):
    """The point is not on the requested critical manifold."""


@dataclass(frozen=True)
class KuehnParams:
    mu: float = 1.0
    n: int = 2
    eps: float = 0.0

    def __post_init__(self) -> None:
        if self.mu == 0:
            raise ValueError("mu must be nonzero")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclass(frozen=True)
class PwsParams:
    phi_kind: Literal["cst_cubic", "tanh"] = "tanh"
    eps: float = 0.01
    rho: float = 1.0
    theta: float = 1.0
    nu: float = 0.1

    def __post_init__(self) -> None:
        if self.phi_kind not in ("cst_cubic", "tanh"):
            raise ValueError(f"unknown regularization {self.phi_kind!r}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if min(self.rho, self.theta, self.nu) <= 0:
            raise ValueError("section constants must be positive")


@dataclass(frozen=True)
class AircraftParams:
    a: float = 1.0
    b: float = 0.5
    alpha: float = 0.0
    eps: float = 0.0

    def __post_init__(self) -> None:
        if self.b <= 0:
            raise ValueError("b must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    @property
    def v_f(self) -> float:
        return self.a - 1.0 / self.b

    @property
    def u_f(self) -> float:
        return math.exp((self.a - 1.0 / self.b) * self.b) / self.b

    @property
    def y_f(self) -> float:
        if self.v_f >= 0:
            raise ValueError("fold is not visible at v = -infinity (needs a - 1/b < 0)")
        return -1.0 / self.v_f

    @property
    def x_f(self) -> float:
        return -self.u_f / self.v_f if self.v_f < 0 else math.nan


# regularization functions ---------------------------------------------

def phi(kind: str, s: float) -> float:
    if kind == "tanh":
        return math.tanh(s)
    if kind == "cst_cubic":
        if s >= 1.0:
            return 1.0
        if s <= -1.0:
            return -1.0
        return -0.5 * s**3 + 1.5 * s
    raise ValueError(f"unknown regularization {kind!r}")


def _phi_prime(kind: str, s: float) -> float:
    if kind == "tanh":
        return 1.0 - math.tanh(s) ** 2
    if abs(s) >= 1.0:
        return 0.0
    return 1.5 * (1.0 - s * s)


def phi_bracket(n: int = 2, phi_n_derivative: float | None = None) -> float:
    """(-1)^(n+1)/n! times the n-th left derivative at 1.

    Without an explicit derivative the cubic example is used, for which the
    second derivative at 1- is -3.
    """
    if phi_n_derivative is None:
        if n != 2:
            raise ValueError("only n = 2 is built in; pass the n-th derivative at 1")
        phi_n_derivative = -3.0
    val = (-1) ** (n + 1) / math.factorial(n) * phi_n_derivative
    if val <= 0:
        raise ValueError("phi^[n] must be positive")
    return val


def _tanh_gap(s: float) -> float:
    # (1 - tanh s)/(1 + tanh s) = exp(-2s), evaluated without cancellation
    return math.exp(min(-2.0 * s, 700.0))


# Kuehn -----------------------------------------------------------------

def kuehn_fields(p: KuehnParams) -> dict[str, OdeSystem]:
    mu, n, eps = p.mu, p.n, p.eps
    par = {"mu": mu, "n": n, "eps": eps}

    def original(z):
        u, v = z
        return np.array([eps * mu, 1.0 - v**n * u])

    def compact(z):
        x, y, e = z
        return np.array([e * mu * y**n, y * y * (x - y**n), 0.0])

    def flat(z):
        x, y = z
        lam = flat_exp(1.0, y)
        return np.array([eps * mu * lam, y * y * (x - lam)])

    def kappa1(z):
        r1, x1, y, e1 = z
        return np.array([r1 * (x1 - 1.0), (1.0 - x1) * x1 + e1 * mu, y * y * (x1 - 1.0), (1.0 - x1) * e1])

    return {
        "kuehn.original": OdeSystem("kuehn.original", 2, original, par, var_names=("u", "v")),
        "kuehn.compact": OdeSystem("kuehn.compact", 3, compact, par, var_names=("x", "y", "eps")),
        "kuehn.flat": OdeSystem("kuehn.flat", 2, flat, par, lambda z: z[1] >= 0, ("x", "y")),
        "kuehn.q": extend_kuehn(mu).extended,
        "kuehn.kappa1": OdeSystem("kuehn.kappa1", 4, kappa1, par, var_names=("r1", "x1", "y", "eps1")),
    }


# piecewise smooth visible fold -----------------------------------------

def filippov_classify(x: float) -> str:
    """Region of the switching line y = 0 containing ``x``."""
    if x < 0:
        return "sliding"
    if x > 0:
        return "crossing"
    return "fold"


def filippov_sliding_rhs(x: float) -> float:
    """Sliding velocity 1/(1 - 2x), the Filippov convex combination of the two fields."""
    if x >= 0:
        raise ValueError("sliding is only defined for x < 0")
    return 1.0 / (1.0 - 2.0 * x)


_X_PLUS = OdeSystem("pws.plus", 2, lambda z: np.array([1.0, 2.0 * z[0]]), var_names=("x", "y"))
_X_MINUS = OdeSystem("pws.minus", 2, lambda z: np.array([0.0, 1.0]), var_names=("x", "y"))
_SLIDE = OdeSystem("pws.sliding", 2, lambda z: np.array([1.0 / (1.0 - 2.0 * z[0]), 0.0]), var_names=("x", "y"))


def pws_flow(x0: float, y0: float, t_max: float, config: IntegratorConfig | None = None) -> Trajectory:
    """Hybrid Filippov flow of the visible fold, stitched from event-located pieces.

    Recorded events: 0 = lands on the sliding region, 1 = leaves through the
    fold point, 2 = crosses the switching line upward.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    # the pieces are polynomial, so the error estimate vanishes; cap the step
    # so that sign changes of y are never stepped over
    cfg = config or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_step=0.01)
    hit_from_below = EventSpec(lambda z: z[1], "rising", True)
    hit_from_above = EventSpec(lambda z: z[1], "falling", True)
    reach_fold = EventSpec(lambda z: z[0], "rising", True)
    t, z = 0.0, np.array([x0, y0], dtype=float)
    times, states, events = [t], [z.copy()], []
    status = "completed"
    while t < t_max and len(events) < 16:
        x, y = z
        if y < 0:
            mode, ev = _X_MINUS, hit_from_below
        elif y > 0 or x >= 0:
            mode, ev = _X_PLUS, hit_from_above
        else:
            mode, ev = _SLIDE, reach_fold
        tr = integrate(mode, z, (t, t_max), cfg, [ev])
        times.extend(tr.times[1:])
        states.extend(tr.states[1:])
        t, z = tr.t_final, tr.x_final.copy()
        if tr.status != "terminated_by_event":
            status = tr.status
            break
        z[1] = 0.0
        if mode is _SLIDE:
            z[0] = 0.0
            tag = 1
        elif z[0] < 0:
            tag = 0
        else:
            tag = 2
        states[-1] = z.copy()
        events.append((tag, t, z.copy()))
    return Trajectory(np.array(times), np.array(states), events, status)


def regularized_fields(p: PwsParams) -> dict[str, OdeSystem]:
    kind, eps = p.phi_kind, p.eps
    par = {"eps": eps}

    def fast(z):
        x, yh = z
        f = phi(kind, yh)
        return np.array([0.5 * eps * (1.0 + f), x * (1.0 + f) + 0.5 * (1.0 - f)])

    def tanh_xy(z):
        x, y = z
        if eps == 0.0:
            # the whole field carries a factor eps
            return np.zeros(2)
        return np.array([eps, eps * (2.0 * x + _tanh_gap(y / eps))])

    def tanh_yhat(z):
        x, yh = z
        return np.array([eps, 2.0 * x + _tanh_gap(yh)])

    def bary(z):
        x, y, e = z
        g = 2.0 * x + flat_exp(2.0, e)
        return np.array([e * y, e * y * g, -e * e * g])

    def app(z):
        x, yh = z
        f = phi(kind, yh)
        return np.array([eps * (1.0 + f), 2.0 * x * (1.0 + f) + 1.0 - f])

    def app1(z):
        # exact right-hand side after division by 1 + phi; ytilde = yhat - 1
        x, yt = z
        f = phi(kind, 1.0 + yt)
        return np.array([eps, 2.0 * x + (1.0 - f) / (1.0 + f)])

    out = {
        "pws.fast": OdeSystem("pws.fast", 2, fast, par, var_names=("x", "yhat")),
        "cst.app": OdeSystem("cst.app", 2, app, par, var_names=("x", "yhat")),
        "cst.app1": OdeSystem("cst.app1", 2, app1, par, lambda z: z[1] > -2.0, ("x", "ytilde")),
    }
    if kind == "tanh":
        out.update({
            "tanh.xy": OdeSystem("tanh.xy", 2, tanh_xy, par, var_names=("x", "y")),
            "tanh.yhat": OdeSystem("tanh.yhat", 2, tanh_yhat, par, var_names=("x", "yhat")),
            "tanh.bary": OdeSystem("tanh.bary", 3, bary, par, lambda z: z[2] >= 0, ("x", "y", "epshat")),
            "tanh.q": extend_tanh().extended,
        })
    return out


def tanh_chart_fields(published: bool = False) -> dict[str, OdeSystem]:
    """Chart fields of the tanh blowup (weights x:1, eps:2, q:1).

    The chart-3 q equation is -q3 (2(2 + q3) + eps3); ``published=True`` also
    returns the displayed variant with an extra factor 2 under ``tanh.kappa3.published``.
    """

    def k1(z):
        r1, x1, e, e1 = z
        s = 2.0 * x1 + 1.0
        return np.array([-2.0 * r1 * s, e1 + 2.0 * x1 * s, -e * e * s, 4.0 * e1 * s])

    def k2(z):
        x2, e, q2, r2 = z
        s = 2.0 * x2 + q2
        return np.array([1.0, -e * e * s, -2.0 * q2 * s, 0.0])

    def k3_factory(c: float):
        def k3(z):
            r3, e, q3, e3 = z
            return np.array([r3 * e3, -e * e * (2.0 + q3), -c * q3 * (2.0 * (2.0 + q3) + e3), -2.0 * e3 * e3])
        return k3

    def k1_reduced(z):
        r1, e, e1 = z
        return np.array([-2.0 * r1, -e * e, 4.0 * e1])

    def k3_reduced(z):
        r3, eb, q3, e3 = z
        return np.array([r3 * e3, -2.0 * eb * eb, -q3 * (2.0 * (2.0 + q3) + e3), -2.0 * e3 * e3])

    out = {
        "tanh.kappa1": OdeSystem("tanh.kappa1", 4, k1, var_names=("r1", "x1", "epshat", "eps1")),
        "tanh.kappa2": OdeSystem("tanh.kappa2", 4, k2, var_names=("x2", "epshat", "q2", "r2")),
        "tanh.kappa3": OdeSystem("tanh.kappa3", 4, k3_factory(1.0), var_names=("r3", "epshat", "q3", "eps3")),
        "tanh.kappa1.reduced": OdeSystem("tanh.kappa1.reduced", 3, k1_reduced, var_names=("r1", "epshat", "eps1")),
        "tanh.kappa3.reduced": OdeSystem("tanh.kappa3.reduced", 4, k3_reduced, var_names=("r3", "epsbreve", "q3", "eps3")),
    }
    if published:
        out["tanh.kappa3.published"] = OdeSystem(
            "tanh.kappa3.published", 4, k3_factory(2.0), var_names=("r3", "epshat", "q3", "eps3"))
    return out


# aircraft ----------------------------------------------------------------

def aircraft_fields(p: AircraftParams, published: bool = False) -> dict[str, OdeSystem]:
    """Aircraft model in (u, v), at v = -infinity, augmented, and in the blowup charts.

    The chart-4 q equation carries the factor b + a y^2/(1 + a y) that the
    chain rule produces; ``published=True`` adds the displayed variant without
    it as ``aircraft.kappa4.published``.
    """
    a, b, alpha, eps = p.a, p.b, p.alpha, p.eps
    par = {"a": a, "b": b, "alpha": alpha, "eps": eps}

    def B(y: float) -> float:
        return b + a * y * y / (1.0 + a * y)

    def uv(z):
        u, v = z
        return np.array([-eps * (alpha - v), -u - (v - a) * math.exp(v * b)])

    def uv_rev(z):
        u, v = z
        return np.array([eps * (alpha - v), u + (v - a) * math.exp(v * b)])

    def infty(z):
        x, y = z
        q = (1.0 + a * y) * flat_exp(b, y)
        return np.array([y * (eps * (1.0 + alpha * y) + x * (x - q)), y * y * (x - q)])

    def xyq(z):
        x, y, q = z
        return np.array([y * ((1.0 + alpha * y) + x * (x - q)), y * y * (x - q), q * (x - q) * B(y)])

    def k1(z):
        r, x1, y1 = z
        Bk = B(r * r * y1)
        return np.array([
            r * (x1 - 1.0) * Bk,
            y1 * (1.0 + alpha * r * r * y1 + r * r * x1 * (x1 - 1.0)) - x1 * (x1 - 1.0) * Bk,
            -y1 * (x1 - 1.0) * (2.0 * Bk - y1 * r * r),
        ])

    def k2(z):
        r, y2, q2 = z
        K = 1.0 + alpha * r * r * y2 + r * r * (1.0 + q2)
        return np.array([
            -r * y2 * K,
            y2 * y2 * (2.0 * K - r * r * (1.0 + q2)),
            -q2 * ((1.0 + q2) * B(r * r * y2) - y2 * K),
        ])

    def k3(z):
        r, x3, q3 = z
        d = x3 - q3
        return np.array([
            0.5 * r**3 * d,
            1.0 + alpha * r * r + 0.5 * r * r * x3 * d,
            q3 * d * (B(r * r) - 0.5 * r * r),
        ])

    def k3_rho0(z):
        x3, q3 = z
        return np.array([1.0, b * q3 * (x3 - q3)])

    def k4_factory(with_b: bool):
        def k4(z):
            r, y4, q4 = z
            K = 1.0 + alpha * r * r * y4 + r * r * (1.0 - q4)
            Bk = B(r * r * y4) if with_b else 1.0
            return np.array([
                r * y4 * K,
                -y4 * y4 * (2.0 * K - r * r * (1.0 - q4)),
                q4 * ((1.0 - q4) * Bk - y4 * K),
            ])
        return k4

    guard_y = lambda z: 1.0 + a * z[1] > 0.0  # noqa: E731
    out = {
        "aircraft.uv": OdeSystem("aircraft.uv", 2, uv, par, var_names=("u", "v")),
        "aircraft.uv.reversed": OdeSystem("aircraft.uv.reversed", 2, uv_rev, par, var_names=("u", "v")),
        "aircraft.infty": OdeSystem("aircraft.infty", 2, infty, par, lambda z: z[1] >= 0 and guard_y(z), ("x", "y")),
        "aircraft.q": extend_aircraft(a, b, alpha).extended,
        "aircraft.q2": OdeSystem("aircraft.q2", 3, xyq, par, guard_y, ("x2", "y", "q2")),
        "aircraft.xyq": OdeSystem("aircraft.xyq", 3, xyq, par, guard_y, ("x", "y", "q")),
        "aircraft.kappa1": OdeSystem("aircraft.kappa1", 3, k1, par, var_names=("rho1", "x1", "y1")),
        "aircraft.kappa2": OdeSystem("aircraft.kappa2", 3, k2, par, var_names=("rho2", "y2", "q2")),
        "aircraft.kappa3": OdeSystem("aircraft.kappa3", 3, k3, par, var_names=("rho3", "x3", "q3")),
        "aircraft.kappa3.rho0": OdeSystem("aircraft.kappa3.rho0", 2, k3_rho0, par, var_names=("x3", "q3")),
        "aircraft.kappa4": OdeSystem("aircraft.kappa4", 3, k4_factory(True), par, var_names=("rho4", "y4", "q4")),
    }
    if published:
        out["aircraft.kappa4.published"] = OdeSystem(
            "aircraft.kappa4.published", 3, k4_factory(False), par, var_names=("rho4", "y4", "q4"))
    return out


# registry ---------------------------------------------------------------

REGISTRY: dict[str, Callable[..., OdeSystem]] = {}


def _register_family(ids, factory):
    for sid in ids:
        REGISTRY[sid] = (lambda s: lambda **kw: factory(**kw)[s])(sid)


_register_family(
    ["kuehn.original", "kuehn.compact", "kuehn.flat", "kuehn.q", "kuehn.kappa1"],
    lambda **kw: kuehn_fields(KuehnParams(**kw)),
)
_register_family(
    ["pws.fast", "cst.app", "cst.app1"],
    lambda **kw: regularized_fields(PwsParams(**{"phi_kind": "cst_cubic", **kw})),
)
_register_family(
    ["tanh.xy", "tanh.yhat", "tanh.bary", "tanh.q"],
    lambda **kw: regularized_fields(PwsParams(**{"phi_kind": "tanh", **kw})),
)
_register_family(
    ["tanh.kappa1", "tanh.kappa2", "tanh.kappa3", "tanh.kappa1.reduced", "tanh.kappa3.reduced"],
    lambda **kw: tanh_chart_fields(**kw),
)
_register_family(
    ["aircraft.uv", "aircraft.uv.reversed", "aircraft.infty", "aircraft.q", "aircraft.q2",
     "aircraft.xyq", "aircraft.kappa1", "aircraft.kappa2", "aircraft.kappa3",
     "aircraft.kappa3.rho0", "aircraft.kappa4"],
    lambda **kw: aircraft_fields(AircraftParams(**kw)),
)


def get_system(system_id: str, **params) -> OdeSystem:
    """Look up a vector field by registry id, e.g. ``get_system("aircraft.infty", eps=0.05)``."""
    try:
        factory = REGISTRY[system_id]
    except KeyError:
        raise KeyError(f"unknown system id {system_id!r}") from None
    return factory(**params)


# chart pairs --------------------------------------------------------------

@dataclass(frozen=True)
class ChartPair:
    label: str
    field: DesingularizedField
    ambient: OdeSystem
    # uniform sampling box for the non-radial local coordinates, in chart.local_vars order
    box: tuple[tuple[float, float], ...]

    def samples(self, rng: np.random.Generator, count: int = 100,
                r_range: tuple[float, float] = (1e-3, 1.0)) -> np.ndarray:
        r = rng.uniform(*r_range, size=(count, 1))
        rest = np.column_stack([rng.uniform(lo, hi, size=count) for lo, hi in self.box])
        return np.hstack([r, rest])


def _with_zero_rate(sys_: OdeSystem, extra: str) -> OdeSystem:
    return OdeSystem(sys_.name + "+" + extra, sys_.dim + 1,
                     lambda z: np.append(sys_(z[:-1]), 0.0), sys_.params, var_names=sys_.var_names + (extra,))


def chart_pairs(kuehn: KuehnParams | None = None, aircraft: AircraftParams | None = None) -> list[ChartPair]:
    """Every shipped chart-local field paired with its ambient parent."""
    kp = kuehn or KuehnParams(mu=1.0)
    ap = aircraft or AircraftParams(a=1.0, b=0.5, alpha=0.3)
    pairs: list[ChartPair] = []

    kspec = BlowupSpec((("x", 1), ("q", 1), ("eps", 1)), ("y",), ("x", "y", "q", "eps"))
    kc1 = Chart(kspec, "q", 1, "1")
    kf = kuehn_fields(kp)
    pairs.append(ChartPair("kuehn.kappa1", DesingularizedField(kc1, kf["kuehn.kappa1"]), kf["kuehn.q"],
                           ((-2.0, 2.0), (0.0, 1.0), (0.0, 1.0))))

    tspec = BlowupSpec((("x", 1), ("eps", 2), ("q", 1)), ("epshat",), ("x", "epshat", "q", "eps"))
    tf = tanh_chart_fields()
    tq = extend_tanh().extended
    pairs.append(ChartPair("tanh.kappa1", DesingularizedField(Chart(tspec, "q", 1, "1"), tf["tanh.kappa1"]), tq,
                           ((-2.0, 2.0), (0.0, 1.0), (0.0, 1.0))))
    pairs.append(ChartPair("tanh.kappa2", DesingularizedField(Chart(tspec, "eps", 1, "2"), tf["tanh.kappa2"]), tq,
                           ((-3.0, 3.0), (0.0, 3.0), (0.0, 1.0))))
    pairs.append(ChartPair("tanh.kappa3", DesingularizedField(Chart(tspec, "x", 1, "3"), tf["tanh.kappa3"]), tq,
                           ((0.0, 1.0), (0.0, 3.0), (0.0, 1.0))))

    af = aircraft_fields(ap)
    aspec = BlowupSpec((("q", 1), ("x", 1), ("eps", 2)), ("y",), ("x", "y", "q", "eps"))
    pairs.append(ChartPair("aircraft.scaling",
                           DesingularizedField(Chart(aspec, "eps", 1, "2"), _with_zero_rate(af["aircraft.q2"], "r2")),
                           af["aircraft.q"], ((0.0, 2.0), (-3.0, 3.0), (0.0, 1.0))))

    fspec = BlowupSpec((("x", 1), ("y", 2), ("q", 1)), (), ("x", "y", "q"))
    boxes = {
        "1": ("q", 1, ((-2.0, 2.0), (0.0, 2.0))),
        "2": ("x", -1, ((0.0, 2.0), (0.0, 2.0))),
        "3": ("y", 1, ((-2.0, 2.0), (0.0, 2.0))),
        "4": ("x", 1, ((0.0, 2.0), (0.0, 2.0))),
    }
    for lab, (fixed, sign, box) in boxes.items():
        chart = Chart(fspec, fixed, sign, lab, radial_name="rho")
        pairs.append(ChartPair(f"aircraft.kappa{lab}", DesingularizedField(chart, af[f"aircraft.kappa{lab}"]),
                               af["aircraft.xyq"], box))
    return pairs


# critical manifolds and eigenvalues ----------------------------------------

def _cubic_inverse(c: float) -> float:
    """Solve -s^3/2 + 3s/2 = c for s in [-1, 1]."""
    if not -1.0 <= c <= 1.0:
        raise OffManifoldError("no preimage in [-1, 1]")
    # trigonometric root of s^3 - 3s + 2c = 0 lying in [-1, 1]
    return 2.0 * math.cos(math.acos(-c) / 3.0 - 2.0 * math.pi / 3.0)


def critical_point(model: str, s: float, params: AircraftParams | PwsParams | None = None) -> np.ndarray:
    """Point of the critical manifold parameterized by ``s``.

    ``kuehn.flat``: s = y.  ``tanh.yhat``: s = yhat.  ``tanh.bary``: s = hat-eps.
    ``cst.app``: s = x < 0.  ``aircraft.uv``: s = v.  ``aircraft.infty``: s = y.
    """
    if model == "kuehn.flat":
        return np.array([flat_exp(1.0, s), s])
    if model == "tanh.yhat":
        return np.array([-0.5 * math.exp(-2.0 * s), s])
    if model == "tanh.bary":
        return np.array([-0.5 * flat_exp(2.0, s), 0.0, s])
    if model == "cst.app":
        if s >= 0:
            raise OffManifoldError("the attracting branch needs x < 0")
        return np.array([s, _cubic_inverse((1.0 + 2.0 * s) / (1.0 - 2.0 * s))])
    if model in ("aircraft.uv", "aircraft.infty"):
        p = params if isinstance(params, AircraftParams) else AircraftParams()
        if model == "aircraft.uv":
            return np.array([(p.a - s) * math.exp(s * p.b), s])
        return np.array([(1.0 + p.a * s) * flat_exp(p.b, s), s])
    raise KeyError(f"no critical manifold for {model!r}")


def layer_fast_indices(model: str) -> tuple[int, ...]:
    return {"kuehn.flat": (1,), "tanh.yhat": (1,), "tanh.bary": (2,), "cst.app": (1,),
            "aircraft.uv": (1,), "aircraft.infty": (1,)}[model]


def _layer_system(model: str, params) -> OdeSystem:
    if model == "kuehn.flat":
        return kuehn_fields(KuehnParams(eps=0.0))[model]
    if model in ("tanh.yhat", "tanh.bary"):
        return regularized_fields(PwsParams("tanh", eps=0.0))[model]
    if model == "cst.app":
        return regularized_fields(PwsParams("cst_cubic", eps=0.0))[model]
    p = params if isinstance(params, AircraftParams) else AircraftParams()
    return aircraft_fields(AircraftParams(p.a, p.b, p.alpha, 0.0))[model]


def eigenvalue_along_manifold(model: str, point, params: AircraftParams | None = None,
                              published: bool = False, tol: float = 1e-10) -> float:
    """Nontrivial layer eigenvalue at a point of the critical manifold.

    For ``aircraft.uv`` the default is -(1 + b(v - a)) e^{vb}, which vanishes
    at the fold; ``published=True`` returns the displayed -(b(v - a) - 1) e^{vb}.
    """
    z = np.asarray(point, dtype=float)
    layer = _layer_system(model, params)
    fast = layer_fast_indices(model)
    f = layer(z)
    res = max(abs(f[i]) for i in fast)
    if res > tol:
        raise OffManifoldError(f"layer residual {res:.3e} exceeds {tol:g}")
    if model == "kuehn.flat":
        return -flat_exp(1.0, z[1])
    if model == "tanh.yhat":
        return -2.0 * math.exp(-2.0 * z[1])
    if model == "tanh.bary":
        return -2.0 * flat_exp(2.0, z[2])
    if model == "cst.app":
        return (2.0 * z[0] - 1.0) * _phi_prime("cst_cubic", z[1])
    p = params if isinstance(params, AircraftParams) else AircraftParams()
    if model == "aircraft.uv":
        v = z[1]
        if published:
            return -(p.b * (v - p.a) - 1.0) * math.exp(v * p.b)
        return -(1.0 + p.b * (v - p.a)) * math.exp(v * p.b)
    if model == "aircraft.infty":
        y = z[1]
        return -p.b * flat_exp(p.b, y) * (1.0 + (p.a - 1.0 / p.b) * y)
    raise KeyError(f"no eigenvalue formula for {model!r}")
