import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from flatblow.odecore import (
    BracketError,
    EventSpec,
    IntegratorConfig,
    OdeSystem,
    integrate,
    locate_event,
)

DECAY = OdeSystem("decay", 1, lambda z: -z, var_names=("y",))
OSC = OdeSystem("osc", 2, lambda z: np.array([z[1], -z[0]]), var_names=("x", "y"))
RAMP = OdeSystem("ramp", 1, lambda z: np.array([1.0]), var_names=("y",))


@pytest.mark.parametrize("method", ["dopri5", "radau5"])
def test_linear_decay(method):
    tr = integrate(DECAY, [1.0], (0.0, 1.0), IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13, method=method))
    assert tr.status == "completed"
    assert abs(tr.x_final[0] - math.exp(-1.0)) <= 1e-9


def test_oscillator_energy():
    tr = integrate(OSC, [1.0, 0.0], (0.0, 2 * math.pi), IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13))
    energy = np.sum(tr.states**2, axis=1)
    assert np.max(np.abs(energy - 1.0)) <= 1e-8


def test_backward_integration():
    tr = integrate(DECAY, [math.exp(-1.0)], (1.0, 0.0), IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13))
    assert abs(tr.x_final[0] - 1.0) <= 1e-9


def test_terminal_event_linear():
    ev = EventSpec(lambda z: z[0] - 0.5, "rising", True, tol_event=1e-12)
    tr = integrate(RAMP, [0.0], (0.0, 2.0), IntegratorConfig(), [ev])
    assert tr.status == "terminated_by_event"
    assert abs(tr.t_final - 0.5) <= 1e-12
    assert abs(ev.g(tr.x_final)) <= ev.tolerance


def test_nonterminal_events_recorded():
    ev = EventSpec(lambda z: z[0], "any")
    tr = integrate(OSC, [1.0, 0.0], (0.0, 4 * math.pi), IntegratorConfig(rel_tol=1e-10), [ev])
    times = [t for t, _ in tr.events_of(0)]
    expected = [math.pi / 2 + k * math.pi for k in range(4)]
    assert np.allclose(times, expected, atol=1e-9)


def test_event_direction_filter():
    ev = EventSpec(lambda z: z[0], "falling")
    tr = integrate(OSC, [1.0, 0.0], (0.0, 4 * math.pi), IntegratorConfig(rel_tol=1e-10), [ev])
    assert len(tr.events_of(0)) == 2


def test_locate_event_examples():
    fast_ramp = OdeSystem("ramp2", 1, lambda z: np.array([2.0]))
    ev = EventSpec(lambda z: z[0] - 0.6, "rising")
    t, x = locate_event(fast_ramp, ((0.0, [0.0]), (0.5, [1.0])), ev)
    assert abs(t - 0.3) <= 1e-12 and abs(ev.g(x)) <= ev.tolerance

    with pytest.raises(BracketError):
        locate_event(fast_ramp, ((0.0, [0.0]), (0.5, [1.0])), EventSpec(lambda z: z[0] - 0.6, "falling"))

    parab = OdeSystem("parab", 2, lambda z: np.array([1.0, 2.0 * z[0]]))
    ev = EventSpec(lambda z: z[0], "rising")
    t, x = locate_event(parab, ((0.0, [-1.0, 1.0]), (2.0, [1.0, 1.0])), ev)
    assert abs(t - 1.0) <= 1e-10
    assert np.allclose(x, [0.0, 0.0], atol=1e-10)


def test_determinism():
    cfg = IntegratorConfig(rel_tol=1e-9)
    ev = [EventSpec(lambda z: z[0], "any")]
    a = integrate(OSC, [1.0, 0.0], (0.0, 10.0), cfg, ev)
    b = integrate(OSC, [1.0, 0.0], (0.0, 10.0), cfg, ev)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
    assert [(i, t) for i, t, _ in a.events] == [(i, t) for i, t, _ in b.events]


def test_trajectory_contract():
    tr = integrate(OSC, [1.0, 0.0], (0.0, 5.0), IntegratorConfig())
    assert np.all(np.diff(tr.times) > 0)
    with pytest.raises(ValueError):
        tr.states[0, 0] = 3.0


def _terminal_errors(rel):
    cfg = IntegratorConfig(rel_tol=rel, abs_tol=rel * 1e-3)
    e1 = abs(integrate(DECAY, [1.0], (0.0, 1.0), cfg).x_final[0] - math.exp(-1.0))
    xo = integrate(OSC, [1.0, 0.0], (0.0, 2 * math.pi), cfg).x_final
    e2 = float(np.hypot(xo[0] - 1.0, xo[1]))
    e3 = abs(integrate(RAMP, [0.0], (0.0, 1.0), cfg).x_final[0] - 1.0)
    return np.array([e1, e2, e3])


def test_halving_rel_tol_does_not_increase_error():
    for rel in (1e-5, 1e-7, 1e-9):
        coarse, fine = _terminal_errors(rel), _terminal_errors(rel / 2)
        # the ramp is integrated exactly, so compare with a rounding allowance
        assert np.all(fine <= coarse + 1e-15), (rel, coarse, fine)


def test_event_time_independent_of_max_step():
    ev = EventSpec(lambda z: z[0] - 0.5, "rising", True, tol_event=1e-12)
    times = []
    for h in (math.inf, 0.1, 0.013):
        tr = integrate(RAMP, [0.0], (0.0, 2.0), IntegratorConfig(max_step=h), [ev])
        times.append(tr.t_final)
    assert max(times) - min(times) <= 10 * ev.tol_event


def test_against_scipy_on_van_der_pol():
    mu = 5.0
    vdp = OdeSystem("vdp", 2, lambda z: np.array([z[1], mu * (1 - z[0] ** 2) * z[1] - z[0]]))
    ref = solve_ivp(lambda t, z: vdp(z), (0.0, 10.0), [2.0, 0.0], method="Radau", rtol=1e-12, atol=1e-12)
    for method in ("dopri5", "radau5"):
        tr = integrate(vdp, [2.0, 0.0], (0.0, 10.0), IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, method=method))
        assert np.allclose(tr.x_final, ref.y[:, -1], rtol=1e-6, atol=1e-7), method


def test_guard_and_step_failure():
    blow = OdeSystem("blow", 1, lambda z: z**2, domain_guard=lambda z: z[0] < 10.0)
    tr = integrate(blow, [1.0], (0.0, 2.0), IntegratorConfig())
    assert tr.status in ("guard_violation", "step_failure")
    with pytest.raises(ValueError):
        integrate(blow, [20.0], (0.0, 1.0))


@pytest.mark.parametrize("kw", [dict(rel_tol=0.0), dict(abs_tol=1.0), dict(min_step=1.0, max_step=0.5),
                                dict(max_steps=0), dict(method="euler")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_nan_field_reports_failure_instead_of_looping():
    from flatblow.odecore import OdeSystem

    sys_ = OdeSystem("nan", 1, lambda z: np.array([math.nan]))
    tr = integrate(sys_, [1.0], (0.0, 1.0), IntegratorConfig())
    assert tr.status in ("step_failure", "guard_violation")
