import math

import numpy as np
import pytest

from flatblow.flatten import extend_aircraft, extend_kuehn, extend_tanh, flat_exp, q_drift, y_from_epshat
from flatblow.odecore import GuardViolation, IntegratorConfig, integrate

E = math.e


def test_kuehn_arithmetic():
    aug = extend_kuehn(1.0)
    f = aug.extended([1.0, 1.0, 1 / E, 0.0])
    assert f[0] == 0.0
    assert math.isclose(f[1], 1 - 1 / E, rel_tol=1e-15)
    assert math.isclose(f[2], (1 / E) * (1 - 1 / E), rel_tol=1e-15)
    assert math.isclose(f[1], 0.6321, abs_tol=1e-4) and math.isclose(f[2], 0.2325, abs_tol=1e-4)


def test_tanh_arithmetic():
    aug = extend_tanh()
    f = aug.extended([0.0, 0.5, math.exp(-4), 0.0])
    assert math.isclose(f[1], -0.25 * math.exp(-4), rel_tol=1e-15)
    assert math.isclose(f[2], -2 * math.exp(-8), rel_tol=1e-15)
    assert math.isclose(f[2], -6.709e-4, rel_tol=1e-3)


def test_aircraft_arithmetic():
    aug = extend_aircraft(1.0, 0.5, 0.3)
    f = aug.extended([0.2, 0.5, 0.1, 0.0])
    assert np.allclose(f, [0.01, 0.025, 0.1 * 0.1 * (2 / 3), 0.0], rtol=1e-14)
    assert math.isclose(f[2], 6.667e-3, rel_tol=1e-4)


def test_aircraft_on_S():
    a, b, alpha, eps = 1.0, 0.5, 0.3, 0.02
    aug = extend_aircraft(a, b, alpha)
    for y0 in (0.1, 0.5, 2.0):
        f = aug.extended([0.07, y0, 0.07, eps])
        assert f[1] == 0.0 and f[2] == 0.0
        assert math.isclose(f[0], y0 * eps * (1 + alpha * y0), rel_tol=1e-15)


def test_aircraft_guard():
    aug = extend_aircraft(1.0, 0.5, 0.0)
    with pytest.raises(GuardViolation):
        aug.extended.checked([0.0, -1.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        extend_aircraft(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        extend_kuehn(0.0)


@pytest.mark.parametrize("aug", [extend_kuehn(1.0), extend_tanh(), extend_aircraft(1.0, 0.5, 0.3)],
                         ids=["kuehn", "tanh", "aircraft"])
def test_axis_invariance(aug):
    rng = np.random.default_rng(5)
    qi = aug.extended.index("q")
    for _ in range(50):
        z = rng.uniform(0.01, 2, size=4)
        z[0] = rng.uniform(-2, 2)
        z[qi] = 0.0
        assert aug.extended(z)[qi] == 0.0


def test_constraint_rate_examples():
    k = extend_kuehn(1.0)
    z = k.lift([0.5, 0.4, 0.0])
    assert z[2] == math.exp(-2.5)
    assert abs(k.q_constraint_rate(z)) <= 1e-15 * abs(k.extended(z)[2]) + 1e-300
    t = extend_tanh()
    z = t.lift([0.3, 0.4, 0.01])
    assert abs(t.q_constraint_rate(z)) <= 1e-15 * abs(t.extended(z)[2])
    a = extend_aircraft(1.0, 0.5, 0.0)
    z = a.lift([0.2, 0.5, 0.01])
    assert abs(a.q_constraint_rate(z)) <= 1e-14 * abs(a.extended(z)[2])


def _random_base(rng):
    # (fast, slow, eps) in base-variable order for all three models
    return np.array([rng.uniform(-2, 2), rng.uniform(0.05, 3), rng.uniform(0, 0.1)])


@pytest.mark.parametrize("aug", [extend_kuehn(-1.0), extend_tanh(), extend_aircraft(1.0, 0.5, 0.3)],
                         ids=["kuehn", "tanh", "aircraft"])
def test_pointwise_q_invariance_and_restriction(aug):
    rng = np.random.default_rng(6)
    qi = aug.extended.index("q")
    for _ in range(100):
        x = _random_base(rng)
        z = aug.lift(x)
        f = aug.extended(z)
        assert abs(aug.q_constraint_rate(z)) <= 1e-12 * abs(f[qi])
        base = aug.base(x)
        ext_base = aug.restrict(f)
        assert np.allclose(ext_base, base, rtol=1e-12, atol=1e-300)


def test_lift_restrict_round_trip():
    aug = extend_kuehn(1.0)
    x = np.array([0.3, 0.7, 0.05])
    assert np.array_equal(aug.restrict(aug.lift(x)), x)


def test_flat_exp_limits():
    assert flat_exp(1.0, 0.0) == 0.0
    assert flat_exp(1.0, -1.0) == 0.0
    assert flat_exp(1.0, 1e-3) == 0.0
    assert math.isclose(flat_exp(1.0, 0.5), math.exp(-2), rel_tol=1e-15)


def test_y_from_epshat():
    assert y_from_epshat(0.5, 0.01) == 0.02
    with pytest.raises(ValueError):
        y_from_epshat(0.0, 0.01)


CFG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14)


def test_drift_kuehn_on_Q():
    aug = extend_kuehn(1.0)
    tr = integrate(aug.extended, aug.lift([0.1, 0.5, 0.01]), (0.0, 1.0), CFG)
    assert q_drift(aug, tr) <= 1e-8


def test_drift_tanh_on_Q():
    aug = extend_tanh()
    tr = integrate(aug.extended, aug.lift([0.0, 0.4, 0.01]), (0.0, 1.0), CFG)
    assert q_drift(aug, tr) <= 1e-8


def test_drift_detects_off_Q_start():
    aug = extend_kuehn(1.0)
    z = aug.lift([0.1, 0.5, 0.01])
    z[2] *= 2.0
    tr = integrate(aug.extended, z, (0.0, 1.0), CFG)
    assert q_drift(aug, tr) >= 0.4
