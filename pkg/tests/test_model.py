import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvts.expr import derivative, evaluate, parse_expr
from lvts.model import (
    CoeffStats, ImpulseSchedule, ModelError, SamplingConfig, bundled_path, compute_stats, derivative_sup,
    extremes, impulse_product_bound, load_model, load_model_file,
)
from lvts.timescale import TimeScaleSpec

from conftest import toy_document

R = TimeScaleSpec.reals()
Z = TimeScaleSpec.lattice(1.0)


def test_bundled_examples_load(example1, example2):
    assert (example1.n, example1.m) == (2, 2)
    assert not example1.ts.is_lattice
    assert example2.ts.is_lattice and example2.ts.step == 1.0


def test_extremes_examples():
    ex = extremes(parse_expr("9 - abs(cos(sqrt(2)*t))"), R)
    assert (ex.sup, ex.inf) == pytest.approx((9, 8), abs=1e-9)
    ex = extremes(parse_expr("0.2 - 0.05*abs(cos(sqrt(2)*t))"), R)
    assert (ex.sup, ex.inf) == pytest.approx((0.2, 0.15), abs=1e-9)
    ex = extremes(parse_expr("0.096"), Z)
    assert (ex.sup, ex.inf) == (0.096, 0.096)


def test_extremes_enclose_random_samples():
    node = parse_expr("0.02 - 0.01*sin(sqrt(5)*t) + 0.003*cos(t)")
    ex = extremes(node, R)
    t = np.random.default_rng(0).uniform(0, SamplingConfig().window, 10_000)
    v = evaluate(node, t)
    assert np.all(v >= ex.inf - 1e-12) and np.all(v <= ex.sup + 1e-12)
    assert ex.outer_lo <= ex.inf <= ex.sup <= ex.outer_hi


def test_derivative_sup_values():
    assert derivative_sup(parse_expr("0.004"), R) == 0
    assert derivative_sup(parse_expr("0.003-0.001*sin(2*pi*t)"), R) == pytest.approx(0.002 * math.pi, rel=1e-6)
    assert derivative_sup(parse_expr("0.001+0.001*cos(pi*t)"), Z) == pytest.approx(0.002, abs=1e-15)


def test_symbolic_derivative_matches_central_differences():
    node = parse_expr("0.003 - 0.001*sin(2*pi*t) + 0.0005*cos(sqrt(3)*t)")
    d = derivative(node)
    t = np.random.default_rng(1).uniform(0, 100, 1000)
    h = 1e-5
    fd = (evaluate(node, t + h) - evaluate(node, t - h)) / (2 * h)
    np.testing.assert_allclose(evaluate(d, t), fd, atol=1e-6)


def _sched(expr):
    return ImpulseSchedule(period=1.0, lambda_x=(parse_expr(expr, "k"),))


def test_impulse_product_bound_trivial():
    assert impulse_product_bound(_sched("0"), 0, 50) == (1.0, 1.0)


def test_impulse_product_bound_decaying():
    lo, hi = impulse_product_bound(_sched("-0.01*0.5^k"), 0, 50)
    assert lo == pytest.approx(math.prod(1 - 0.01 * 0.5 ** k for k in range(1, 51)), rel=1e-14)
    assert lo == pytest.approx(0.99003, abs=1e-5)
    # the empty product is part of the running products
    assert hi == 1.0


def test_impulse_product_bound_divergent():
    lo, hi = impulse_product_bound(_sched("exp(0.04^(0.5^k)) - 1"), 0, 50)
    assert lo == 1.0
    assert hi > 1e20


def test_impulse_product_bound_rejects_lambda_le_minus_one():
    with pytest.raises(ValueError):
        impulse_product_bound(_sched("-1"), 0, 5)


def test_example1_delay_stats(example1):
    st_ = compute_stats(example1)
    assert st_.tau_plus == pytest.approx(0.004, abs=1e-9)
    assert st_.tau_minus == pytest.approx(0.002, abs=1e-9)
    assert st_.delta_plus == pytest.approx(0.003, abs=1e-9)
    assert st_.delta_minus == pytest.approx(0.001, abs=1e-9)
    assert st_.tau_delta == pytest.approx(0.002 * math.pi, rel=1e-6)


def test_example1_coefficient_stats(example1):
    st_ = compute_stats(example1)
    np.testing.assert_allclose(st_.sup["b"], [9, 9], atol=1e-9)
    np.testing.assert_allclose(st_.inf["b"], [8, 8], atol=1e-9)
    np.testing.assert_allclose(st_.inf["d"], [[0.15, 0.3], [0.19, 0.19]], atol=1e-9)
    np.testing.assert_allclose(st_.sup["d"], [[0.2, 0.4], [0.2, 0.2]], atol=1e-9)


def test_example2_delay_stats(example2):
    st_ = compute_stats(example2)
    assert (st_.tau_plus, st_.tau_minus) == pytest.approx((0.002, 0.0), abs=1e-15)
    assert (st_.xi_plus, st_.xi_minus) == pytest.approx((0.002, 0.0), abs=1e-15)
    assert st_.mu_bar == 1.0


def test_override_records_both_values(example1):
    st_ = compute_stats(example1, use_override=True)
    assert st_.r == 0.9
    assert st_.overridden["r"] == {"computed": 1.0, "pinned": 0.9}
    assert st_.tau_delta == 0.002


def test_constant_toy_stats(toy):
    st_ = compute_stats(toy(n=2, m=1))
    for k in st_.sup:
        np.testing.assert_array_equal(st_.sup[k], st_.inf[k])


def test_compute_stats_deterministic(example1):
    a, b = compute_stats(example1), compute_stats(example1)
    assert a.to_dict() == b.to_dict()


def test_missing_matrix_entry_is_dimension_error():
    doc = json.loads(bundled_path("example1").read_text())
    del doc["a"][0][1]
    with pytest.raises(ModelError, match="a"):
        load_model(doc)


def test_negative_coefficient_rejected():
    with pytest.raises(ModelError):
        load_model(toy_document(b=["sin(t)"]))


def test_nonincreasing_explicit_times_rejected():
    doc = toy_document(impulses={"times": {"explicit": [1.0, 1.0, 2.0]}, "lambda_x": ["0"]})
    with pytest.raises(ModelError):
        load_model(doc)


def test_lambda_must_exceed_minus_one():
    doc = toy_document(impulses={"times": {"periodic": {"period": 1}}, "lambda_x": ["-1.5"]})
    with pytest.raises(ModelError):
        load_model(doc)


def test_lattice_impulses_on_grid():
    doc = toy_document(kind="lattice", impulses={"times": {"explicit": [1.5]}, "lambda_x": ["0"]})
    with pytest.raises(ModelError):
        load_model(doc)


def test_syntax_error_in_file_is_model_error():
    with pytest.raises(ModelError):
        load_model(toy_document(b=["1 +"]))


def test_load_model_file_round_trip(tmp_path, example1):
    path = tmp_path / "m.json"
    path.write_text(bundled_path("example1").read_text())
    assert load_model_file(path).model_hash() == example1.model_hash()


def test_from_constants_shapes():
    st_ = CoeffStats.from_constants([1, 2], [0.1], [[1, 0], [0, 1]], [[0], [0]], [[0.1, 0.1]], [[1]])
    assert st_.sup["c"].shape == (2, 1) and st_.sup["d"].shape == (1, 2)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.01, 1), st.floats(0.1, 3))
def test_extremes_of_shifted_sine(c, amp, w):
    node = parse_expr(f"{c + amp} + {amp}*sin({w}*t)")
    ex = extremes(node, R)
    assert ex.sup == pytest.approx(c + 2 * amp, rel=1e-9)
    assert ex.inf == pytest.approx(c, rel=1e-9, abs=1e-9)


def test_prey_only_stats_keep_matrix_shapes(toy):
    st_ = compute_stats(toy(n=2, m=0))
    assert st_.sup["d"].shape == (0, 2) and st_.sup["e"].shape == (0, 0) and st_.sup["c"].shape == (2, 0)
