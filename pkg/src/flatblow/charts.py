"""Weighted blowups, directional charts and the desingularization checker.

A chart is pure data: the blowup weights, which barred coordinate is pinned
to +1 or -1, and the names of the local variables.  Coordinate maps and
transitions are generated from that description.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .odecore import OdeSystem

__all__ = [
    "BlowupSpec",
    "Chart",
    "DesingularizedField",
    "NotInChartError",
    "ambient_to_chart",
    "chart_jacobian",
    "chart_to_ambient",
    "desingularization_check",
    "transition",
]


class NotInChartError(ValueError):
    """Point is outside the domain of a directional chart."""


@dataclass(frozen=True)
class BlowupSpec:
    blown_vars: tuple[tuple[str, int], ...]
    untouched_vars: tuple[str, ...] = ()
    # order of ambient coordinates; defaults to blown then untouched
    ambient_order: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        blown = tuple((str(n), int(w)) for n, w in self.blown_vars)
        object.__setattr__(self, "blown_vars", blown)
        object.__setattr__(self, "untouched_vars", tuple(self.untouched_vars))
        names = [n for n, _ in blown]
        if len(set(names)) != len(names):
            raise ValueError("duplicate blown variable")
        if any(w < 1 for _, w in blown):
            raise ValueError("weights must be >= 1")
        if set(names) & set(self.untouched_vars):
            raise ValueError("blown and untouched variables overlap")
        order = tuple(self.ambient_order) or tuple(names) + self.untouched_vars
        if sorted(order) != sorted(names + list(self.untouched_vars)):
            raise ValueError("ambient_order must list every variable exactly once")
        object.__setattr__(self, "ambient_order", order)

    @property
    def weights(self) -> dict[str, int]:
        return dict(self.blown_vars)

    @property
    def center(self) -> dict[str, float]:
        """The blown-up set: every blown variable equal to zero."""
        return {n: 0.0 for n, _ in self.blown_vars}


@dataclass(frozen=True)
class Chart:
    spec: BlowupSpec
    fixed_var: str
    sign: int = 1
    label: str = ""
    radial_name: str = "r"
    # optional explicit names: radial, remaining barred vars in blown order, untouched
    local_names: tuple[str, ...] = ()
    local_vars: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.fixed_var not in self.spec.weights:
            raise ValueError(f"{self.fixed_var!r} is not a blown variable")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        free = [n for n, _ in self.spec.blown_vars if n != self.fixed_var]
        default = (f"{self.radial_name}{self.label}",) + tuple(f"{n}{self.label}" for n in free) + self.spec.untouched_vars
        names = tuple(self.local_names) or default
        if len(names) != len(default):
            raise ValueError(f"expected {len(default)} local names, got {len(names)}")
        object.__setattr__(self, "local_vars", names)

    @property
    def dim(self) -> int:
        return len(self.local_vars)

    def _roles(self):
        # (ambient name, local index or None for the fixed var, weight)
        free = [n for n, _ in self.spec.blown_vars if n != self.fixed_var]
        idx = {n: i + 1 for i, n in enumerate(free)}
        for n, w in self.spec.blown_vars:
            yield n, idx.get(n), w


def chart_to_ambient(chart: Chart, p: Sequence[float]) -> np.ndarray:
    """Blow down a local point; the result is ordered by ``spec.ambient_order``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (chart.dim,):
        raise ValueError(f"expected {chart.dim} local coordinates")
    r = p[0]
    if r < 0:
        raise NotInChartError("radial coordinate must be nonnegative")
    vals: dict[str, float] = {}
    for name, li, w in chart._roles():
        bar = chart.sign if li is None else p[li]
        vals[name] = r**w * bar
    n_free = len(chart.spec.blown_vars) - 1
    for k, name in enumerate(chart.spec.untouched_vars):
        vals[name] = p[1 + n_free + k]
    return np.array([vals[n] for n in chart.spec.ambient_order])


def ambient_to_chart(chart: Chart, a: Sequence[float]) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    order = chart.spec.ambient_order
    if a.shape != (len(order),):
        raise ValueError(f"expected {len(order)} ambient coordinates")
    vals = dict(zip(order, a))
    w_fix = chart.spec.weights[chart.fixed_var]
    v_fix = vals[chart.fixed_var]
    if v_fix == 0 or np.sign(v_fix) != chart.sign:
        raise NotInChartError(f"{chart.fixed_var} = {v_fix} is not in chart {chart.label or chart.fixed_var}")
    r = (chart.sign * v_fix) ** (1.0 / w_fix)
    out = [r]
    for name, li, w in chart._roles():
        if li is not None:
            out.append(vals[name] / r**w)
    out.extend(vals[n] for n in chart.spec.untouched_vars)
    return np.array(out)


def transition(src: Chart, dst: Chart, p: Sequence[float]) -> np.ndarray:
    """Change of chart through the common ambient space."""
    if src.spec != dst.spec:
        raise ValueError("charts belong to different blowups")
    return ambient_to_chart(dst, chart_to_ambient(src, p))


def chart_jacobian(chart: Chart, p: Sequence[float]) -> np.ndarray:
    """Derivative of chart_to_ambient; rows follow ambient_order, columns local_vars."""
    p = np.asarray(p, dtype=float)
    order = chart.spec.ambient_order
    row = {n: i for i, n in enumerate(order)}
    J = np.zeros((len(order), chart.dim))
    r = p[0]
    for name, li, w in chart._roles():
        bar = chart.sign if li is None else p[li]
        J[row[name], 0] = w * r ** (w - 1) * bar
        if li is not None:
            J[row[name], li] = r**w
    n_free = len(chart.spec.blown_vars) - 1
    for k, name in enumerate(chart.spec.untouched_vars):
        J[row[name], 1 + n_free + k] = 1.0
    return J


@dataclass(frozen=True)
class DesingularizedField:
    chart: Chart
    rhs: OdeSystem
    divisor_power: int = 1
    time_factor: Optional[Callable[[np.ndarray], float]] = None

    def __post_init__(self) -> None:
        names = self.rhs.var_names
        if sorted(names) != sorted(self.chart.local_vars):
            raise ValueError(
                f"field variables {names} do not match chart variables {self.chart.local_vars}"
            )

    def local_rhs(self, p: Sequence[float]) -> np.ndarray:
        """Evaluate the field at a point given in ``chart.local_vars`` order."""
        p = np.asarray(p, dtype=float)
        perm = [self.chart.local_vars.index(n) for n in self.rhs.var_names]
        f = self.rhs(p[perm])
        out = np.empty_like(f)
        out[perm] = f
        return out


def desingularization_check(fld: DesingularizedField, ambient: OdeSystem,
                            samples: Sequence[Sequence[float]]) -> float:
    """Worst relative mismatch between r^k J f_local (times time_factor) and the ambient field."""
    chart = fld.chart
    if sorted(ambient.var_names) != sorted(chart.spec.ambient_order):
        raise ValueError("ambient system variables do not match the blowup")
    perm = [chart.spec.ambient_order.index(n) for n in ambient.var_names]
    worst = 0.0
    for p in samples:
        p = np.asarray(p, dtype=float)
        if p[0] <= 0:
            raise ValueError("samples must have r > 0")
        a = chart_to_ambient(chart, p)[perm]
        pushed = (chart_jacobian(chart, p) @ fld.local_rhs(p))[perm] * p[0] ** fld.divisor_power
        if fld.time_factor is not None:
            pushed = pushed * fld.time_factor(a)
        ref = ambient(a)
        scale = max(np.max(np.abs(ref)), np.max(np.abs(pushed)), 1e-300)
        worst = max(worst, float(np.max(np.abs(pushed - ref)) / scale))
    return worst
