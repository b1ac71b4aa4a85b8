import numpy as np
import pytest

from flatblow.charts import (
    BlowupSpec,
    Chart,
    NotInChartError,
    ambient_to_chart,
    chart_jacobian,
    chart_to_ambient,
    desingularization_check,
    transition,
)
from flatblow.systems import chart_pairs

# tanh blowup of (x, eps, q) with hat-eps untouched; ambient order (x, epshat, q, eps)
TSPEC = BlowupSpec((("x", 1), ("eps", 2), ("q", 1)), ("epshat",), ("x", "epshat", "q", "eps"))
T1 = Chart(TSPEC, "q", 1, "1")
T2 = Chart(TSPEC, "eps", 1, "2")
T3 = Chart(TSPEC, "x", 1, "3")
KSPEC = BlowupSpec((("x", 1), ("q", 1), ("eps", 1)), ("y",), ("x", "y", "q", "eps"))
K1 = Chart(KSPEC, "q", 1, "1")
ASPEC = BlowupSpec((("q", 1), ("x", 1), ("eps", 2)), ("y",), ("x", "y", "q", "eps"))
A2 = Chart(ASPEC, "eps", 1, "2")


def amb(spec, **vals):
    return np.array([vals[n] for n in spec.ambient_order])


def test_local_variable_layouts():
    assert T1.local_vars == ("r1", "x1", "eps1", "epshat")
    assert K1.local_vars == ("r1", "x1", "eps1", "y")
    assert A2.local_vars == ("r2", "q2", "x2", "y")


def test_blow_down_examples():
    got = chart_to_ambient(T1, [0.1, -0.5, 0.04, 0.3])
    assert np.allclose(got, amb(TSPEC, x=-0.05, eps=0.0004, q=0.1, epshat=0.3), rtol=1e-15)
    got = chart_to_ambient(K1, [0.2, 1.0, 0.5, 0.05])
    assert np.allclose(got, amb(KSPEC, x=0.2, q=0.2, eps=0.1, y=0.05), rtol=1e-15)
    got = chart_to_ambient(A2, [0.1, 1.0, 2.0, 0.3])
    assert np.allclose(got, amb(ASPEC, x=0.2, q=0.1, eps=0.01, y=0.3), rtol=1e-15)


@pytest.mark.parametrize("chart,p", [
    (T1, [0.1, -0.5, 0.04, 0.3]),
    (K1, [0.2, 1.0, 0.5, 0.05]),
    (A2, [0.1, 1.0, 2.0, 0.3]),
])
def test_round_trip_examples(chart, p):
    back = ambient_to_chart(chart, chart_to_ambient(chart, p))
    assert np.allclose(back, p, rtol=1e-12, atol=0)


def test_not_in_chart():
    with pytest.raises(NotInChartError):
        ambient_to_chart(T1, amb(TSPEC, x=-0.05, eps=0.0004, q=0.0, epshat=0.3))
    with pytest.raises(NotInChartError):
        ambient_to_chart(T3, amb(TSPEC, x=-0.05, eps=0.0004, q=0.1, epshat=0.3))
    with pytest.raises(NotInChartError):
        chart_to_ambient(T1, [-0.1, 0.0, 0.0, 0.0])


def test_kappa2_from_ambient():
    r2, x2, q2, _ = ambient_to_chart(T2, amb(TSPEC, x=-0.05, eps=0.0004, q=0.1, epshat=0.0))
    assert np.allclose([r2, x2, q2], [0.02, -2.5, 5.0], rtol=1e-12)


def test_published_transitions():
    # kappa1 -> kappa2: q2 = 1/sqrt(eps1), x2 = x1/sqrt(eps1), r2 = r1 sqrt(eps1)
    r2, x2, q2, e = transition(T1, T2, [0.1, -0.5, 0.25, 0.7])
    assert np.allclose([q2, x2, r2, e], [2.0, -1.0, 0.05, 0.7], rtol=1e-12)
    # kappa2 -> kappa3: q3 = q2/x2, r3 = r2 x2, eps3 = 1/x2^2
    r3, e3, q3, e = transition(T2, T3, [0.1, 2.0, 0.5, 0.7])
    assert np.allclose([q3, r3, e3, e], [0.25, 0.2, 0.25, 0.7], rtol=1e-12)


def test_transition_round_trip_and_composition():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = np.array([rng.uniform(0.01, 1), rng.uniform(-2, 2), rng.uniform(0.05, 2), rng.uniform(0, 1)])
        there = transition(T1, T2, p)
        assert np.allclose(there, ambient_to_chart(T2, chart_to_ambient(T1, p)), rtol=1e-12, atol=0)
        assert np.allclose(transition(T2, T1, there), p, rtol=1e-12, atol=1e-15)


def test_transition_rejects_foreign_chart():
    with pytest.raises(ValueError):
        transition(T1, K1, [0.1, 0.0, 0.1, 0.1])


def test_weight_homogeneity():
    rng = np.random.default_rng(4)
    w = np.array([TSPEC.weights.get(n, 0) for n in TSPEC.ambient_order])
    blown = w > 0
    for _ in range(20):
        p = np.array([rng.uniform(0.1, 1), rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(0, 1)])
        s = rng.uniform(0.5, 3)
        a = chart_to_ambient(T1, p)
        q = p.copy()
        q[0] *= s
        b = chart_to_ambient(T1, q)
        assert np.allclose(b[blown], a[blown] * s ** w[blown], rtol=1e-14)
        assert np.array_equal(b[~blown], a[~blown])


def test_jacobian_matches_finite_difference():
    p = np.array([0.3, -0.7, 0.4, 0.2])
    J = chart_jacobian(T2, p)
    h = 1e-6
    fd = np.column_stack([(chart_to_ambient(T2, p + h * e) - chart_to_ambient(T2, p - h * e)) / (2 * h)
                          for e in np.eye(4)])
    assert np.allclose(J, fd, atol=1e-9)


def test_spec_validation():
    with pytest.raises(ValueError):
        BlowupSpec((("x", 1), ("x", 2)))
    with pytest.raises(ValueError):
        BlowupSpec((("x", 0),))
    with pytest.raises(ValueError):
        BlowupSpec((("x", 1),), ("x",))
    with pytest.raises(ValueError):
        Chart(TSPEC, "epshat")
    with pytest.raises(ValueError):
        Chart(TSPEC, "x", sign=2)


PAIRS = chart_pairs()


@pytest.mark.parametrize("pair", PAIRS, ids=[p.label for p in PAIRS])
def test_every_shipped_chart_desingularizes(pair):
    rng = np.random.default_rng(11)
    samples = pair.samples(rng, 100)
    assert desingularization_check(pair.field, pair.ambient, samples) <= 1e-9


def test_desingularization_rejects_zero_radius():
    pair = PAIRS[0]
    with pytest.raises(ValueError):
        desingularization_check(pair.field, pair.ambient, [[0.0, 1.0, 0.1, 0.1]])


def test_desingularization_detects_a_wrong_field():
    from flatblow.charts import DesingularizedField
    from flatblow.odecore import OdeSystem

    pair = next(p for p in PAIRS if p.label == "tanh.kappa1")
    good = pair.field.rhs
    bad = OdeSystem("bad", good.dim, lambda z: good(z) * np.array([1.0, 1.1, 1.0, 1.0]), var_names=good.var_names)
    fld = DesingularizedField(pair.field.chart, bad)
    samples = pair.samples(np.random.default_rng(0), 20)
    assert desingularization_check(fld, pair.ambient, samples) > 1e-3
