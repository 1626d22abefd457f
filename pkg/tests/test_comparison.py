import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from lvts.comparison import (
    ComparisonParams as P, HypothesisViolation, lemma31_M, lemma31_m, lemma32_M, lemma32_m, xbar,
)


def test_xbar_examples():
    assert xbar(1, 1, 0) == 1
    assert xbar(2, 3, 2) == pytest.approx(2, rel=1e-15)
    assert xbar(1, 0, 4) == 2


def test_xbar_errors():
    with pytest.raises(ValueError):
        xbar(0, 1, 1)
    with pytest.raises(ValueError):
        xbar(1, -1, 0)


@settings(max_examples=500)
@given(st.floats(1e-3, 10), st.floats(-10, 10), st.floats(0, 10))
def test_xbar_residual(a, b, d):
    assume(b > 0 or d > 0)
    x = xbar(a, b, d)
    assert x > 0
    assert abs(x * (a * x - b) - d) <= 1e-10 * max(1, abs(d), b * b / a)


def test_lemma31_M_examples():
    assert lemma31_M(P(a=2, b=4)) == 2
    m = lemma31_M(P(a=1.9, b=9, tau_bar=0.004))
    assert m == pytest.approx(9 / 1.9 * math.exp(0.036), rel=1e-15)
    assert math.log(m) == pytest.approx(1.591, abs=1e-3)
    assert lemma31_M(P(a=1, b=1, d=1)) == pytest.approx((1 + math.sqrt(5)) / 2)


def test_lemma31_M_needs_regressive_b():
    with pytest.raises(HypothesisViolation):
        lemma31_M(P(a=1, b=2, mu_bar=0.5))


def test_lemma31_m_examples():
    assert lemma31_m(P(a=2, b=3, N=5)) == 1.5
    # growth rate net of the cross-species terms, as it enters the first prey lower bound of the lattice example
    b_eff = 0.1 - 0.003 * math.exp(0.03409935) - 0.001 * (math.exp(0.01402495) + math.exp(0.03830901))
    p = P(a=0.096, b=b_eff, N=math.exp(0.04104422), alpha=2, beta=2, mu_bar=1, tau_bar=0.002)
    m = lemma31_m(p)
    assert m == pytest.approx(b_eff * 4 / 0.096 * math.exp(math.log(1 - 0.096 * math.exp(0.04104422)) * 0.002))
    assert m == pytest.approx(3.950, abs=2e-3)
    assert math.log(m) == pytest.approx(1.374, abs=1e-3)


def test_lemma31_m_limit_continuity():
    p = P(a=0.7, b=1.3, N=2.0, tau_bar=0.4, alpha=0.9)
    assert lemma31_m(p) == pytest.approx(lemma31_m(p.with_(mu_bar=1e-9)), rel=1e-6)


def test_lemma31_m_violation():
    with pytest.raises(HypothesisViolation):
        lemma31_m(P(a=1, b=1, N=2, mu_bar=0.5, tau_bar=1))


def test_lemma32_examples():
    assert lemma32_M(P(a=2, b=4)) == 2
    p = P(a=1, b=1, N=1, mu_bar=1, tau_bar=1)
    assert lemma32_M(p) == pytest.approx(math.e)
    assert lemma32_m(p) == pytest.approx(0.5)
    q = P(a=0.5, b=2, N=3, tau_bar=0.2, alpha=0.8)
    assert lemma32_m(q) == pytest.approx(lemma31_m(q), rel=1e-15)


params = st.builds(
    P, a=st.floats(0.05, 5), b=st.floats(0.05, 5), d=st.floats(0, 3), tau_bar=st.floats(0, 1),
    mu_bar=st.sampled_from([0.0, 0.01, 0.05]), alpha=st.just(0.5), beta=st.floats(0.5, 1), N=st.floats(0, 3),
)


@settings(max_examples=300)
@given(params, st.floats(0, 1), st.sampled_from(["d", "beta", "tau_bar", "mu_bar"]))
def test_lemma31_M_monotone(p, bump, field):
    assume(1 - p.b * (p.mu_bar + bump) > 0.05)
    q = p.with_(**{field: getattr(p, field) + bump})
    assert lemma31_M(q) >= lemma31_M(p) * (1 - 1e-12)


@settings(max_examples=300)
@given(params, st.floats(0, 1), st.sampled_from(["N", "tau_bar"]))
def test_lemma31_m_monotone(p, bump, field):
    q = p.with_(**{field: getattr(p, field) + bump})
    assume(1 - q.a * q.N * q.mu_bar > 0.01)
    assert lemma31_m(q) <= lemma31_m(p) * (1 + 1e-12)
    assert lemma31_m(p) <= p.b * p.alpha ** 2 / p.a * (1 + 1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        P(a=0, b=1)
    with pytest.raises(ValueError):
        P(a=1, b=1, alpha=2, beta=1)
