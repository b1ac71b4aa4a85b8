"""Adaptive integration of autonomous ODEs with section (event) detection.

Two steppers are available:

* ``"dopri5"``: Dormand-Prince 5(4) explicit pair with a PI step controller.
* ``"radau5"``: three-stage Radau IIA (order 5, L-stable) with simplified
  Newton iterations on a finite-difference Jacobian.

Events are detected by a sign change of ``g`` between accepted steps and
polished by bisection in time, re-stepping from the left end of the bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Mapping, Sequence

import numpy as np

__all__ = [
    "BracketError",
    "EventSpec",
    "GuardViolation",
    "IntegratorConfig",
    "OdeSystem",
    "Trajectory",
    "integrate",
    "locate_event",
]

Direction = Literal["rising", "falling", "any"]
Status = Literal["completed", "terminated_by_event", "step_failure", "guard_violation"]


class BracketError(ValueError):
    """Raised when an event bracket has no admissible sign change."""


class GuardViolation(ValueError):
    """Raised when a state fails a system's domain guard."""


def _always(_x: np.ndarray) -> bool:
    return True


@dataclass(frozen=True)
class OdeSystem:
    """Named autonomous vector field ``x' = rhs(x)``.

    ``params`` is informational; the closure in ``rhs`` already carries the
    parameter values.  ``var_names`` labels the state components.
    """

    name: str
    dim: int
    rhs: Callable[[np.ndarray], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    domain_guard: Callable[[np.ndarray], bool] = _always
    var_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.var_names and len(self.var_names) != self.dim:
            raise ValueError("var_names must have length dim")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.rhs(np.asarray(x, dtype=float)), dtype=float)

    def checked(self, x: Sequence[float]) -> np.ndarray:
        """Evaluate the field after enforcing the domain guard."""
        x = np.asarray(x, dtype=float)
        if not self.domain_guard(x):
            raise GuardViolation(f"{self.name}: state {x} is outside the admissible domain")
        return self(x)

    def index(self, name: str) -> int:
        return self.var_names.index(name)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    min_step: float = 1e-14
    max_steps: int = 200_000
    method: Literal["dopri5", "radau5"] = "dopri5"
    first_step: float | None = None

    def __post_init__(self) -> None:
        if not (0 < self.rel_tol < 1 and 0 < self.abs_tol < 1):
            raise ValueError("tolerances must lie in (0, 1)")
        if not (0 < self.min_step <= self.max_step):
            raise ValueError("need 0 < min_step <= max_step")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.method not in ("dopri5", "radau5"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class EventSpec:
    """Section ``g(x) = 0`` crossed in the given direction.

    The polished state satisfies ``|g| <= tol_event * (1 + scale)``.
    """

    g: Callable[[np.ndarray], float]
    direction: Direction = "any"
    terminal: bool = False
    tol_event: float = 1e-12
    scale: float = 0.0

    @property
    def tolerance(self) -> float:
        return self.tol_event * (1.0 + abs(self.scale))

    def crosses(self, g0: float, g1: float) -> bool:
        if self.direction == "rising":
            return g0 < 0.0 <= g1
        if self.direction == "falling":
            return g0 > 0.0 >= g1
        return (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    events: tuple[tuple[int, float, np.ndarray], ...]
    status: Status
    message: str = ""

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def x_final(self) -> np.ndarray:
        return self.states[-1]

    def events_of(self, index: int) -> list[tuple[float, np.ndarray]]:
        return [(t, x) for i, t, x in self.events if i == index]


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array(
    [
        71 / 57600,
        0.0,
        -71 / 16695,
        71 / 1920,
        -17253 / 339200,
        22 / 525,
        -1 / 40,
    ]
)

# Radau IIA, three stages
_S6 = math.sqrt(6.0)
_RA = np.array(
    [
        [(88 - 7 * _S6) / 360, (296 - 169 * _S6) / 1800, (-2 + 3 * _S6) / 225],
        [(296 + 169 * _S6) / 1800, (88 + 7 * _S6) / 360, (-2 - 3 * _S6) / 225],
        [(16 - _S6) / 36, (16 + _S6) / 36, 1 / 9],
    ]
)
_RC = np.array([(4 - _S6) / 10, (4 + _S6) / 10, 1.0])
# embedded error estimate (Hairer & Wanner), expressed for the stage increments
_RE = np.array([-13 - 7 * _S6, -13 + 7 * _S6, -1.0]) / 3.0
_MU_REAL = 3.0 + 3.0 ** (2 / 3) - 3.0 ** (1 / 3)
_NEWTON_MAXITER = 7


class _StepFailed(Exception):
    pass


def _err_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, cfg: IntegratorConfig) -> float:
    sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def _finite(v: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(v)))


class _Dopri:
    order = 5
    err_exp = 0.2

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], cfg: IntegratorConfig):
        self.f = f
        self.cfg = cfg
        self.k1: np.ndarray | None = None
        self.k1_at: np.ndarray | None = None

    def step(self, y: np.ndarray, h: float) -> tuple[np.ndarray, float]:
        f = self.f
        if self.k1 is not None and self.k1_at is y:
            k1 = self.k1
        else:
            k1 = f(y)
        k = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(_DP_A[i], k) if a != 0.0)
            ki = f(yi)
            if not _finite(ki):
                raise _StepFailed("non-finite rhs")
            k.append(ki)
        ynew = y + h * sum(b * kj for b, kj in zip(_DP_B, k) if b != 0.0)
        err = h * sum(e * kj for e, kj in zip(_DP_E, k) if e != 0.0)
        self._pending = (ynew, k[6])
        return ynew, _err_norm(err, y, ynew, self.cfg)

    def accept(self, ynew: np.ndarray) -> None:
        # FSAL: the last stage is f(ynew)
        y_p, k7 = self._pending
        if y_p is ynew:
            self.k1, self.k1_at = k7, ynew


class _Radau:
    order = 5
    err_exp = 0.25

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], cfg: IntegratorConfig):
        self.f = f
        self.cfg = cfg

    def jacobian(self, y: np.ndarray, fy: np.ndarray) -> np.ndarray:
        n = y.size
        J = np.empty((n, n))
        sq = math.sqrt(np.finfo(float).eps)
        for i in range(n):
            d = sq * (1.0 + abs(y[i]))
            yp = y.copy()
            yp[i] += d
            J[:, i] = (self.f(yp) - fy) / d
        return J

    def step(self, y: np.ndarray, h: float) -> tuple[np.ndarray, float]:
        f, cfg = self.f, self.cfg
        n = y.size
        fy = f(y)
        J = self.jacobian(y, fy)
        eye = np.eye(n)
        M = np.eye(3 * n) - h * np.kron(_RA, J)
        try:
            Minv = np.linalg.inv(M)
        except np.linalg.LinAlgError as exc:
            raise _StepFailed("singular Newton matrix") from exc
        sc = cfg.abs_tol + cfg.rel_tol * np.abs(y)
        # stage increments Z (3 x n), start from zero
        Z = np.zeros((3, n))
        F = np.empty((3, n))
        converged = False
        rate = None
        dz_prev = None
        tol_newton = max(10 * np.finfo(float).eps / cfg.rel_tol, min(0.03, cfg.rel_tol ** 0.5))
        for _ in range(_NEWTON_MAXITER):
            for i in range(3):
                F[i] = f(y + Z[i])
            if not _finite(F):
                raise _StepFailed("non-finite rhs in Newton iteration")
            G = Z - h * (_RA @ F)
            dZ = -(Minv @ G.reshape(-1)).reshape(3, n)
            Z = Z + dZ
            dz = float(np.sqrt(np.mean((dZ / sc) ** 2)))
            if dz_prev is not None:
                rate = dz / dz_prev if dz_prev > 0 else 0.0
            if rate is not None and rate >= 1.0:
                break
            if dz == 0.0 or (rate is not None and rate / (1 - rate) * dz < tol_newton):
                converged = True
                break
            dz_prev = dz
        if not converged:
            raise _StepFailed("Newton iteration did not converge")
        ynew = y + Z[2]
        # error estimate
        ZE = (_RE @ Z) / h
        Mr = _MU_REAL / h * eye - J
        try:
            err = np.linalg.solve(Mr, fy + ZE)
        except np.linalg.LinAlgError as exc:
            raise _StepFailed("singular error matrix") from exc
        en = _err_norm(err, y, ynew, cfg)
        if en > 1.0:
            # stiff filtering as in Hairer & Wanner, second pass
            fz = f(y + err)
            if _finite(fz):
                err = np.linalg.solve(Mr, fz + ZE)
                en = _err_norm(err, y, ynew, cfg)
        if not math.isfinite(en):
            raise _StepFailed("non-finite error estimate")
        return ynew, en

    def accept(self, ynew: np.ndarray) -> None:
        pass


def _make_stepper(system: OdeSystem, cfg: IntegratorConfig):
    f = system.__call__
    return _Radau(f, cfg) if cfg.method == "radau5" else _Dopri(f, cfg)


def _initial_step(system: OdeSystem, y0: np.ndarray, span: float, cfg: IntegratorConfig, order: int) -> float:
    if cfg.first_step is not None:
        return min(cfg.first_step, span)
    f0 = system(y0)
    sc = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 or not math.isfinite(d1) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = system(y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / sc) ** 2))) / h0 if _finite(f1) else math.inf
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return max(min(100 * h0, h1, span, cfg.max_step), cfg.min_step)


def _single_step(stepper, y: np.ndarray, h: float) -> np.ndarray:
    """Take the state from ``y`` over ``h``, splitting until each piece is accepted."""
    rest = h
    cur = y
    sub = h
    while abs(rest) > 0:
        sub = math.copysign(min(abs(sub), abs(rest)), h)
        try:
            ynew, en = stepper.step(cur, sub)
        except _StepFailed:
            en = math.inf
            ynew = cur
        if en <= 1.0 or abs(sub) < 1e-15 * (1 + abs(h)):
            cur = ynew
            rest -= sub
            if abs(rest) < 1e-16 * abs(h):
                break
        else:
            sub *= 0.5
    return cur


def _bisect(stepper, t0: float, y0: np.ndarray, g0: float, t1: float, y1: np.ndarray,
            ev: EventSpec) -> tuple[float, np.ndarray]:
    tol = ev.tolerance
    lo_t, lo_y, lo_g = t0, y0, g0
    hi_t, hi_y, hi_g = t1, y1, float(ev.g(y1))
    if abs(hi_g) <= tol:
        best = (hi_t, hi_y)
    else:
        best = None
    for _ in range(200):
        if best is not None and abs(float(ev.g(best[1]))) <= tol:
            break
        mid_t = 0.5 * (lo_t + hi_t)
        if mid_t == lo_t or mid_t == hi_t:
            break
        # always step from the left bracket end for accuracy
        mid_y = _single_step(stepper, lo_y, mid_t - lo_t)
        mid_g = float(ev.g(mid_y))
        if abs(mid_g) <= tol:
            best = (mid_t, mid_y)
            break
        if (lo_g < 0) == (mid_g < 0):
            lo_t, lo_y, lo_g = mid_t, mid_y, mid_g
        else:
            hi_t, hi_y, hi_g = mid_t, mid_y, mid_g
    if best is None:
        best = (hi_t, hi_y) if abs(hi_g) <= abs(lo_g) else (lo_t, lo_y)
    return best


def locate_event(system: OdeSystem, bracket: tuple[tuple[float, Sequence[float]], tuple[float, Sequence[float]]],
                 event: EventSpec, config: IntegratorConfig | None = None) -> tuple[float, np.ndarray]:
    """Polish a crossing of ``event`` inside ``bracket = ((t0, x0), (t1, x1))``.

    ``x1`` is only used to check the sign change; intermediate states are
    produced by stepping from ``x0``.
    """
    cfg = config or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    (t0, x0), (t1, x1) = bracket
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    g0, g1 = float(event.g(x0)), float(event.g(x1))
    if not event.crosses(g0, g1):
        raise BracketError(f"no {event.direction} sign change of g over the bracket (g0={g0:.3g}, g1={g1:.3g})")
    stepper = _make_stepper(system, cfg)
    return _bisect(stepper, float(t0), x0, g0, float(t1), x1, event)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def integrate(system: OdeSystem, x0: Sequence[float], t_span: tuple[float, float],
              config: IntegratorConfig | None = None,
              events: Sequence[EventSpec] = ()) -> Trajectory:
    """Integrate ``system`` from ``x0`` over ``t_span`` (forward or backward)."""
    cfg = config or IntegratorConfig()
    y = np.array(x0, dtype=float)
    if y.shape != (system.dim,):
        raise ValueError(f"x0 must have shape ({system.dim},)")
    if not system.domain_guard(y):
        raise ValueError("x0 violates the domain guard")
    t0, t1 = float(t_span[0]), float(t_span[1])
    times = [t0]
    states = [y.copy()]
    hits: list[tuple[int, float, np.ndarray]] = []

    def done(status: Status, msg: str = "") -> Trajectory:
        return Trajectory(
            times=_freeze(np.array(times)),
            states=_freeze(np.array(states)),
            events=tuple((i, t, _freeze(np.array(s))) for i, t, s in hits),
            status=status,
            message=msg,
        )

    if t1 == t0:
        return done("completed")
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    stepper = _make_stepper(system, cfg)
    h = _initial_step(system, y, span, cfg, stepper.order)
    gvals = [float(ev.g(y)) for ev in events]
    t = t0
    err_old = 1e-4
    safety, fac_min, fac_max = 0.9, 0.2, 10.0
    beta = 0.04 if cfg.method == "dopri5" else 0.0
    n_steps = 0
    rejected_last = False
    while direction * (t1 - t) > 0:
        if n_steps >= cfg.max_steps:
            return done("step_failure", "max_steps exceeded")
        if not math.isfinite(h):
            return done("step_failure", f"non-finite step size at t={t:.17g}")
        h = min(h, cfg.max_step, abs(t1 - t))
        min_h = max(cfg.min_step, 8 * np.spacing(abs(t)))
        if h < min_h and abs(t1 - t) > min_h:
            return done("step_failure", f"step size underflow at t={t:.17g}")
        try:
            ynew, en = stepper.step(y, direction * h)
            ok_guard = bool(system.domain_guard(ynew)) and _finite(ynew)
        except _StepFailed:
            en, ok_guard, ynew = math.inf, True, y
        if not ok_guard:
            if h <= 2 * min_h:
                return done("guard_violation", f"left admissible domain near t={t:.17g}")
            h *= 0.25
            rejected_last = True
            continue
        if en <= 1.0:
            tn = t + direction * h if abs(t1 - (t + direction * h)) > 1e-15 * max(1.0, abs(t1)) else t1
            if abs(t1 - t) <= h:
                tn = t1
            stepper.accept(ynew)
            n_steps += 1
            stop = False
            for i, ev in enumerate(events):
                gn = float(ev.g(ynew))
                if ev.crosses(gvals[i], gn):
                    te, ye = _bisect(stepper, t, y, gvals[i], tn, ynew, ev)
                    hits.append((i, te, ye))
                    if ev.terminal:
                        times.append(te)
                        states.append(np.array(ye))
                        stop = True
                        break
                gvals[i] = gn
            if stop:
                hits.sort(key=lambda e: direction * e[1])
                return done("terminated_by_event")
            t, y = tn, ynew
            times.append(t)
            states.append(y.copy())
            # PI controller (Hairer's DOPRI5 form); plain I-controller for radau5
            en_c = max(en, 1e-10)
            fac = en_c ** (stepper.err_exp - 0.75 * beta) / err_old ** beta
            fac = min(fac_max, max(fac_min, safety / fac))
            if rejected_last:
                fac = min(fac, 1.0)
            h *= fac
            err_old = max(en, 1e-4)
            rejected_last = False
        else:
            if math.isfinite(en):
                fac = max(fac_min, safety * en ** (-stepper.err_exp))
            else:
                fac = 0.25
            h *= fac
            rejected_last = True
    return done("completed")
