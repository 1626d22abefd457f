import math

import pytest
from hypothesis import given, settings, strategies as st

from lvts.comparison import ComparisonParams as P
from lvts.oracles import ScalarSchedule, comparison_oracle_27, comparison_oracle_31, lemma27_closed_form
from lvts.timescale import TimeScaleSpec

R = TimeScaleSpec.reals()
Z = TimeScaleSpec.lattice(1.0)


def _const(v):
    return lambda s: v


def test_closed_form_trivial():
    for ts in (R, Z):
        sim, closed = comparison_oracle_27(_const(0.0), _const(0.0), ScalarSchedule((3.0,), (1.0,)), ts, 0, 6, 1.7)
        assert sim == pytest.approx(1.7, rel=1e-12) and closed == pytest.approx(1.7, rel=1e-12)


def test_closed_form_lattice_single_jump():
    sim, closed = comparison_oracle_27(_const(0.1), _const(0.0), ScalarSchedule((5.0,), (0.5,)), Z, 0, 10, 1.0)
    assert sim == pytest.approx(0.5 * 1.1 ** 10, rel=1e-14)
    assert closed == pytest.approx(sim, rel=1e-12)
    assert sim == pytest.approx(1.29687, abs=1e-5)


def test_closed_form_reals_linear_ode():
    x0 = 3.0
    sim, closed = comparison_oracle_27(_const(-1.0), _const(1.0), ScalarSchedule(), R, 0, 3, x0)
    expect = 1 + (x0 - 1) * math.exp(-3)
    assert sim == pytest.approx(expect, rel=1e-10)
    assert closed == pytest.approx(expect, rel=1e-6)


def test_closed_form_additive_jumps():
    sched = ScalarSchedule((2.0, 4.0), (0.8, 1.2), (0.3, -0.1))
    p, q = (lambda s: 0.05 * math.cos(s)), (lambda s: 0.1 + 0.02 * s)
    for ts in (R, Z):
        sim, closed = comparison_oracle_27(p, q, sched, ts, 0, 7, 1.0)
        assert closed == pytest.approx(sim, rel=1e-6)


def test_impulse_at_endpoints_excluded():
    sched = ScalarSchedule((0.0, 4.0), (0.5, 0.5))
    assert lemma27_closed_form(Z, _const(0.0), _const(0.0), sched, 0, 4, 1.0) == 1.0


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.5, 0.5), st.floats(0.3, 1.0), st.floats(-0.2, 0.2), st.floats(0.2, 3))
def test_closed_form_agrees_on_lattice(p, q, d, b, x0):
    sched = ScalarSchedule((3.0, 6.0), (d, d), (b, 0.0))
    sim, closed = comparison_oracle_27(_const(p), _const(q), sched, Z, 0, 9, x0)
    assert abs(sim - closed) <= 1e-6 * max(1, abs(closed))


def test_oracle31_logistic_equality():
    rep = comparison_oracle_31(P(a=2, b=3), mode="upper", horizon=20, x0=0.5)
    c = rep.check("lemma31_M")
    assert c.bound == pytest.approx(1.5) and c.empirical == pytest.approx(1.5, rel=1e-6)
    assert rep.satisfied


def test_oracle31_delayed_reals():
    rep = comparison_oracle_31(P(a=1, b=1, tau_bar=0.1), horizon=60, x0=0.5)
    assert rep.check("lemma31_M").bound == pytest.approx(math.exp(0.1))
    assert rep.satisfied and {c.name for c in rep.checks} == {"lemma31_M", "lemma31_m"}


def test_oracle31_lattice():
    rep = comparison_oracle_31(P(a=0.1, b=0.1, tau_bar=1), ts=Z, horizon=400, x0=0.5)
    assert rep.params.mu_bar == 1.0
    assert {c.name for c in rep.checks} == {"lemma31_M", "lemma32_M", "lemma31_m", "lemma32_m"}
    assert rep.satisfied


def test_oracle31_with_impulses():
    sched = ScalarSchedule.geometric(1.0, 80, 0.3)
    rep = comparison_oracle_31(P(a=1.5, b=2, d=0.2, tau_bar=0.05), schedule=sched, horizon=80, x0=1.0)
    assert rep.params.alpha == pytest.approx(math.prod(sched.d))
    assert rep.satisfied


def test_oracle31_rejects_bad_schedule():
    with pytest.raises(ValueError):
        comparison_oracle_31(P(a=1, b=1), schedule=ScalarSchedule((1.0,), (1.5,)))
    with pytest.raises(ValueError):
        comparison_oracle_31(P(a=1, b=1), mode="sideways")


def test_schedule_validation():
    with pytest.raises(ValueError):
        ScalarSchedule((1.0, 1.0), (1.0, 1.0))
    assert ScalarSchedule().prefix_bounds() == (1.0, 1.0)
    assert ScalarSchedule((1.0, 2.0), (0.5, 1.5)).prefix_bounds() == (0.5, 1.0)
