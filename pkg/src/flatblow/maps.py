"""Section-to-section maps, contraction fits, entry-exit and canard bisection."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .asymptotics import tanh_seed_x
from .odecore import BracketError, EventSpec, IntegratorConfig, OdeSystem, integrate
from .systems import AircraftParams, aircraft_fields, kuehn_fields, KuehnParams, regularized_fields, PwsParams

__all__ = [
    "CanardResult",
    "LogLinearFit",
    "MapFailure",
    "SectionMapResult",
    "SeedError",
    "canard_bisect",
    "canard_classify",
    "contraction_scaling",
    "entry_exit_map",
    "fit_log_linear",
    "p1_map",
    "p3_map",
    "slow_manifold_seed",
    "tanh_exit_offsets",
    "transition_map",
]


class MapFailure(RuntimeError):
    """An orbit did not reach its target section."""


class SeedError(RuntimeError):
    """Settling onto the slow manifold failed."""


@dataclass(frozen=True)
class SectionMapResult:
    inputs: tuple[float, ...]
    outputs: tuple[np.ndarray | None, ...]
    transit_times: tuple[float, ...]
    failed: tuple[bool, ...]
    exit_index: int
    contraction_estimate: float
    degenerate: bool

    @property
    def exits(self) -> np.ndarray:
        """Exit coordinate per input (nan where the transit failed)."""
        return np.array([math.nan if o is None else o[self.exit_index] for o in self.outputs])

    @property
    def spread(self) -> float:
        e = self.exits[~np.isnan(self.exits)]
        return float(e.max() - e.min()) if e.size else math.nan


def transition_map(system: OdeSystem, entry: Callable[[float], Sequence[float]], exit_event: EventSpec,
                   inputs: Sequence[float], exit_index: int, t_max: float,
                   config: IntegratorConfig | None = None, workers: int = 1) -> SectionMapResult:
    """Push each entry point ``entry(s)`` forward to the first terminal crossing of ``exit_event``.

    Orbits that do not reach the exit within ``t_max`` or the step budget are
    flagged, not fatal.  Results are ordered like ``inputs`` whatever ``workers`` is.
    """
    cfg = config or IntegratorConfig(rel_tol=1e-11, abs_tol=1e-14)
    ev = EventSpec(exit_event.g, exit_event.direction, True, exit_event.tol_event, exit_event.scale)

    def run(s: float):
        tr = integrate(system, entry(s), (0.0, t_max), cfg, [ev])
        if tr.status == "terminated_by_event":
            return tr.x_final.copy(), tr.t_final, False
        return None, math.nan, True

    if workers > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(run, inputs))
    else:
        res = [run(s) for s in inputs]
    outs = tuple(r[0] for r in res)
    ok = [i for i, r in enumerate(res) if not r[2]]
    degenerate = len(ok) < 2
    est = math.nan
    if not degenerate:
        lo = min(ok, key=lambda i: inputs[i])
        hi = max(ok, key=lambda i: inputs[i])
        if inputs[hi] != inputs[lo]:
            est = abs(outs[hi][exit_index] - outs[lo][exit_index]) / abs(inputs[hi] - inputs[lo])
        else:
            degenerate = True
    return SectionMapResult(tuple(float(s) for s in inputs), outs, tuple(r[1] for r in res),
                            tuple(r[2] for r in res), exit_index, est, degenerate)


@dataclass(frozen=True)
class LogLinearFit:
    slope: float
    intercept: float
    r2: float
    x: tuple[float, ...]
    y: tuple[float, ...]
    dropped: tuple[float, ...] = ()


def fit_log_linear(x: Sequence[float], values: Sequence[float]) -> LogLinearFit:
    """Least-squares line through (x, ln value)."""
    x = np.asarray(x, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return LogLinearFit(float(slope), float(icpt), r2, tuple(x), tuple(y))


def contraction_scaling(spread_at: Callable[[float], float], eps_list: Sequence[float],
                        floor: float = 1e-280) -> LogLinearFit:
    """Fit ln(spread) against 1/eps; values below ``floor`` are dropped with a warning."""
    keep_x, keep_s, dropped = [], [], []
    for eps in eps_list:
        s = spread_at(eps)
        if not (s >= floor) or not math.isfinite(s):
            warnings.warn(f"spread {s:g} at eps={eps:g} is below the floor; dropped", RuntimeWarning)
            dropped.append(eps)
            continue
        keep_x.append(1.0 / eps)
        keep_s.append(s)
    if len(keep_x) < 3:
        raise ValueError("fewer than three usable eps values")
    fit = fit_log_linear(keep_x, keep_s)
    return LogLinearFit(fit.slope, fit.intercept, fit.r2, fit.x, fit.y, tuple(dropped))


def tanh_exit_offsets(eps: float, ys: Sequence[float], x_entry: float = -1.0, theta: float = 1.0,
                      config: IntegratorConfig | None = None) -> np.ndarray:
    """Exit offsets y_i(theta) - y_0(theta) of the tanh (x, y) map, free of cancellation.

    Both orbits share x(t), so the offset d = y_i - y_0 obeys
    d' = eps exp(-2 y_0/eps) expm1(-2 d/eps) and is integrated alongside the
    reference orbit.  Subtracting exit values instead bottoms out near
    1e-12 because the exits themselves are of order one.
    """
    if eps <= 0 or theta <= x_entry:
        raise ValueError("need eps > 0 and theta > x_entry")
    cfg = config or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-300, max_steps=400_000)
    y0 = float(ys[0])

    def rhs(z):
        x, y, d = z
        g = math.exp(min(-2.0 * y / eps, 700.0))
        return np.array([eps, eps * (2.0 * x + g), eps * g * math.expm1(min(-2.0 * d / eps, 700.0))])

    sys_ = OdeSystem("tanh.offset", 3, rhs, {"eps": eps}, var_names=("x", "y", "d"))
    ev = EventSpec(lambda z: z[0] - theta, "rising", True)
    out = [0.0]
    for y in ys[1:]:
        tr = integrate(sys_, [x_entry, y0, float(y) - y0], (0.0, 2.0 * (theta - x_entry) / eps), cfg, [ev])
        if tr.status != "terminated_by_event":
            raise MapFailure(f"offset orbit from y = {y} did not reach x = {theta} ({tr.status})")
        out.append(float(tr.x_final[2]))
    return np.array(out)


# entry-exit in the aircraft scaling chart ----------------------------------

def entry_exit_map(params: AircraftParams, y0: float, x2_in: float, q_section: float = 0.5,
                   config: IntegratorConfig | None = None, t_max: float = 1e7) -> float:
    """Exit x2 of the first return to q2 = q_section (q2 increasing).

    ``q_section`` is the inverse of the large constant defining the return section.
    """
    if y0 <= 0 or q_section <= 0:
        raise ValueError("y0 and q_section must be positive")
    sys_ = aircraft_fields(params)["aircraft.q2"]
    cfg = config or IntegratorConfig(rel_tol=1e-11, abs_tol=1e-300, max_steps=400_000)
    ev = EventSpec(lambda z: math.log(z[2] / q_section) if z[2] > 0 else -math.inf, "rising", True)
    tr = integrate(sys_, [x2_in, y0, q_section], (0.0, t_max), cfg, [ev])
    if tr.status != "terminated_by_event":
        raise MapFailure(f"no return to q2 = {q_section} from x2 = {x2_in} ({tr.status})")
    return float(tr.x_final[0])


# canard explosion ---------------------------------------------------------

@dataclass(frozen=True)
class CanardResult:
    alpha_lo: float
    alpha_hi: float
    alpha_c: float
    width: float
    classifier_log: tuple[tuple[float, str], ...]
    stall_reason: str
    iterations: int
    # class of the lower bracket end; the upper end has the other class
    lo_class: str = "head"


def canard_classify(params: AircraftParams, alpha: float, thresholds: Sequence[float] = (3.0, 5.0, 8.0),
                    horizon: float = 10.0, config: IntegratorConfig | None = None) -> dict[float, str]:
    """Classify the orbit through the attracting branch for each escape threshold.

    Start on u = (a - v) e^{vb} at v = v_f + 0.5, follow it past the fold v = v_f,
    then call the passage ``head`` if v drops below v_f - threshold before u
    climbs back above u_f, within ``horizon / eps`` time units.
    """
    if params.eps <= 0:
        raise ValueError("eps must be positive")
    p = AircraftParams(params.a, params.b, alpha, params.eps)
    sys_ = aircraft_fields(p)["aircraft.uv"]
    cfg = config or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, method="radau5", max_steps=400_000)
    v_f, u_f = p.v_f, p.u_f
    t_end = horizon / p.eps
    v0 = v_f + 0.5
    z0 = [(p.a - v0) * math.exp(v0 * p.b), v0]
    past_fold = EventSpec(lambda z: z[1] - v_f, "falling", True)
    tr = integrate(sys_, z0, (0.0, t_end), cfg, [past_fold])
    if tr.status != "terminated_by_event":
        return {d: "no_head" for d in thresholds}
    ths = sorted(thresholds)
    events = [EventSpec((lambda d: lambda z: z[1] - (v_f - d))(d), "falling", d == ths[-1]) for d in ths]
    events.append(EventSpec(lambda z: z[0] - u_f, "rising", True))
    tr2 = integrate(sys_, tr.x_final, (tr.t_final, t_end), cfg, events)
    t_ret = math.inf
    ret = tr2.events_of(len(ths))
    if ret:
        t_ret = ret[0][0]
    out = {}
    for i, d in enumerate(ths):
        hit = tr2.events_of(i)
        out[d] = "head" if hit and hit[0][0] < t_ret else "no_head"
    return out


def canard_bisect(params: AircraftParams, bracket: tuple[float, float], max_iter: int = 60,
                  thresholds: Sequence[float] = (3.0, 5.0, 8.0), primary: float = 5.0,
                  horizon: float = 10.0, config: IntegratorConfig | None = None,
                  edge_rtol: float = 0.01) -> CanardResult:
    """Bisect alpha between a ``head`` and a ``no_head`` end.

    Bisection proceeds while every escape threshold agrees at the midpoint.
    It stalls when the midpoint equals an end in floating point, after
    ``max_iter`` halvings, or when the thresholds disagree.  In the last case
    the midpoint sits inside the explosion window, where the head size varies
    continuously with alpha; both edges of that window are then located
    (to ``edge_rtol`` of its width) and returned as the bracket, so the
    width measures the window itself.
    """
    if primary not in thresholds:
        raise ValueError("primary threshold must be one of the thresholds")
    lo, hi = sorted(float(b) for b in bracket)
    if lo == hi:
        raise BracketError("bracket has zero width")
    log: list[tuple[float, str]] = []

    def cls(alpha: float) -> str:
        c = canard_classify(params, alpha, thresholds, horizon, config)
        log.append((alpha, c[primary]))
        vals = set(c.values())
        return vals.pop() if len(vals) == 1 else "mixed"

    c_lo, c_hi = cls(lo), cls(hi)
    if "mixed" in (c_lo, c_hi):
        raise BracketError("a bracket end lies inside the explosion window")
    if c_lo == c_hi:
        raise BracketError(f"both bracket ends classify as {c_lo}")
    reason = "max_iter"
    it = 0
    inner: list[float] = []
    while it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            reason = "float_resolution"
            break
        it += 1
        c = cls(mid)
        if c == "mixed":
            reason = "threshold_disagreement"
            inner = [mid, mid]
            break
        if c == c_lo:
            lo = mid
        else:
            hi = mid
    if inner:
        # shrink each outer end toward the window until the gap is small
        for side in (0, 1):
            while it < max_iter:
                gap = (inner[0] - lo) if side == 0 else (hi - inner[1])
                if gap <= edge_rtol * (inner[1] - inner[0]):
                    break
                mid = 0.5 * (lo + inner[0]) if side == 0 else 0.5 * (inner[1] + hi)
                if mid in (lo, hi, inner[0], inner[1]):
                    break
                it += 1
                c = cls(mid)
                if side == 0 and c == c_lo:
                    lo = mid
                elif side == 1 and c == c_hi:
                    hi = mid
                else:
                    inner[side] = mid
    return CanardResult(lo, hi, 0.5 * (lo + hi), hi - lo, tuple(log), reason, it, c_lo)


# slow-manifold seeds --------------------------------------------------------

def _settle(sys_: OdeSystem, z_up, event: EventSpec, t_max: float, cfg: IntegratorConfig) -> np.ndarray:
    ev = EventSpec(event.g, event.direction, True, event.tol_event, event.scale)
    tr = integrate(sys_, z_up, (0.0, t_max), cfg, [ev])
    if tr.status != "terminated_by_event":
        raise SeedError(f"settling run ended with status {tr.status}")
    return tr.x_final.copy()


def _hold(sys_: OdeSystem, z, settle_time: float, cfg: IntegratorConfig) -> np.ndarray:
    tr = integrate(sys_, z, (0.0, settle_time), cfg, [])
    if tr.status != "completed":
        raise SeedError(f"settling run ended with status {tr.status}")
    return tr.x_final.copy()


def slow_manifold_seed(model: str, arc: float, eps: float = 0.0, *, mu: float = 1.0,
                       aircraft: AircraftParams | None = None, settle_time: float = 50.0,
                       config: IntegratorConfig | None = None) -> np.ndarray:
    """First-order slow-manifold point on a section, relaxed by a settling run.

    The settling run starts on the critical manifold upstream of the section
    and is integrated until it crosses the section again.  With ``eps = 0`` the
    seed is an equilibrium and is integrated in place for ``settle_time``.

    ``tanh``: arc is xi, section hat-y = 1/xi, state (x, hat-y).
    ``tanh.x``: arc is the section x value (< 0), state (x, y) of the (x, y) form.
    ``kuehn.kappa1``: arc is eps1, state (r1, x1, y, eps1) with r1 = y = 0.
    ``aircraft``: arc is the section y value, state (x, y) at v = -infinity.
    """
    cfg = config or IntegratorConfig(rel_tol=1e-11, abs_tol=1e-14, max_steps=400_000)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if model == "tanh":
        sys_ = regularized_fields(PwsParams("tanh", eps=eps))["tanh.yhat"]
        seed = np.array([tanh_seed_x(arc, eps), 1.0 / arc])
        if eps == 0:
            return _hold(sys_, seed, settle_time, cfg)
        x_up = -0.5 * math.exp(-2.0 / arc) - eps * settle_time
        z_up = [x_up, -0.5 * math.log(-2.0 * x_up)]
        return _settle(sys_, z_up, EventSpec(lambda z: z[1] - 1.0 / arc, "rising"), 10.0 * settle_time + 10.0 / eps, cfg)
    if model == "tanh.x":
        if arc >= 0:
            raise ValueError("the x section must lie on the sliding side (x < 0)")
        sys_ = regularized_fields(PwsParams("tanh", eps=eps))["tanh.xy"]
        if eps == 0:
            return _hold(sys_, np.array([arc, 0.0]), settle_time, cfg)
        x_up = arc - eps * settle_time
        z_up = [x_up, -0.5 * eps * math.log(-2.0 * x_up)]
        return _settle(sys_, z_up, EventSpec(lambda z: z[0] - arc, "rising"), 2.0 * settle_time, cfg)
    if model == "kuehn.kappa1":
        sys_ = kuehn_fields(KuehnParams(mu=mu))["kuehn.kappa1"]
        if arc == 0:
            return _hold(sys_, np.array([0.0, 1.0, 0.0, 0.0]), settle_time, cfg)
        up = 4.0 * arc if mu > 0 else 0.25 * arc
        z_up = [0.0, 1.0 + mu * up, 0.0, up]
        direction = "falling" if mu > 0 else "rising"
        return _settle(sys_, z_up, EventSpec(lambda z: z[3] - arc, direction), 1e6, cfg)
    if model == "aircraft":
        p = aircraft or AircraftParams()
        sys_ = aircraft_fields(p)["aircraft.infty"]
        seed = np.array([(1.0 + p.a * arc) * math.exp(-p.b / arc), arc])
        if eps != p.eps:
            p = AircraftParams(p.a, p.b, p.alpha, eps)
            sys_ = aircraft_fields(p)["aircraft.infty"]
        if eps == 0:
            return _hold(sys_, seed, settle_time, cfg)
        y_up = 0.5 * arc
        z_up = [(1.0 + p.a * y_up) * math.exp(-p.b / y_up), y_up]
        return _settle(sys_, z_up, EventSpec(lambda z: z[1] - arc, "rising"), 100.0 / eps, cfg)
    raise KeyError(f"no seed recipe for {model!r}")


# closed-form chart maps of the tanh analysis --------------------------------

def p1_map(xi: float, rho: float, eps: float, nu: float) -> tuple[float, float]:
    """Exact image (r1, hat-eps) of the reduced chart-1 flow from r1 = rho to eps1 = nu.

    The leading-order hat-eps is 4/ln(nu/eps).
    """
    T = 0.25 * math.log(rho * rho * nu / eps)
    return math.sqrt(eps / nu), 1.0 / (1.0 / xi + T)


def p3_map(eps_breve: float, eps: float, eta: float, theta: float) -> tuple[float, float]:
    """Reduced chart-3 flow from eps3 = eta to r3 = theta: returns (eps_breve, eps3)."""
    inv = 1.0 / eps_breve + theta * theta / eps - 1.0 / eta
    return 1.0 / inv, eps / (theta * theta)
