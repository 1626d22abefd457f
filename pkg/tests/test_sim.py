import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvts.analysis import permanence_bounds
from lvts.model import compute_stats, load_model
from lvts.sim import (
    SimConfig, SimConfigError, Trajectory, empirical_bounds, simulate, simulate_continuous, simulate_discrete,
    stability_gap,
)

from conftest import toy_document


def _logistic(b="2", a="1", kind="reals", **kw):
    return load_model(toy_document(kind=kind, b=[b], a=[[a]], **kw))


def test_logistic_reaches_equilibrium():
    tr = simulate_continuous(_logistic(), SimConfig(step=0.01, horizon=50, initial_history=[0.1]))
    assert tr.z[-1, 0] == pytest.approx(2.0, abs=1e-6)
    lo, hi = empirical_bounds(tr, 0.9)
    assert lo[0] == pytest.approx(math.log(2), abs=1e-6) and hi[0] == pytest.approx(math.log(2), abs=1e-6)


def test_constant_trajectory_bounds():
    c = 1.7
    tr = Trajectory(np.arange(5.0), np.full((5, 1), c), np.zeros(5, bool), 1, 0)
    lo, hi = empirical_bounds(tr)
    assert lo[0] == math.log(c) == hi[0]


def test_trajectory_is_read_only():
    tr = simulate(_logistic(), SimConfig(step=0.1, horizon=1))
    with pytest.raises(ValueError):
        tr.states[0, 0] = 5.0


def test_csv_layout(toy):
    tr = simulate(toy(n=2, m=1, d=[["0.2", "0.2"]]), SimConfig(step=0.5, horizon=2))
    text = tr.to_csv()
    rows = text.strip().split("\n")
    assert rows[0] == "t,z1,z2,w1,impulse"
    assert len(rows) == len(tr) + 1
    first = rows[1].split(",")
    assert float(first[0]) == 0.0 and first[-1] == "0"
    buf = io.StringIO()
    tr.to_csv(buf)
    assert buf.getvalue() == text


def test_impulse_bookkeeping():
    doc = toy_document(n=1, m=1, d=[["0.3"]],
                       impulses={"times": {"explicit": [1.0, 2.5, 4.0]}, "lambda_x": ["-0.2"], "lambda_y": ["0.1"]})
    tr = simulate(load_model(doc), SimConfig(step=0.05, horizon=5))
    post = np.flatnonzero(tr.impulse)
    np.testing.assert_allclose(tr.t[post], [1.0, 2.5, 4.0], atol=1e-12)
    assert np.all(tr.t[post - 1] == tr.t[post])
    np.testing.assert_array_equal(tr.z[post, 0], 0.8 * tr.z[post - 1, 0])
    np.testing.assert_array_equal(tr.w[post, 0], 1.1 * tr.w[post - 1, 0])
    assert np.all(np.diff(tr.t) >= 0)


def test_lattice_impulses_after_map():
    doc = toy_document(kind="lattice", b=["0.1"], a=[["0.096"]],
                       impulses={"times": {"explicit": [3.0]}, "lambda_x": ["-0.5"]})
    tr = simulate_discrete(load_model(doc), SimConfig(horizon=6))
    post = int(np.flatnonzero(tr.impulse)[0])
    assert tr.t[post] == 3.0 and tr.t[post - 1] == 3.0
    assert tr.z[post, 0] == 0.5 * tr.z[post - 1, 0]
    z2 = tr.z[post - 2, 0]
    assert tr.z[post - 1, 0] == z2 * math.exp(0.1 - 0.096 * z2)


def test_misaligned_step_rejected():
    doc = toy_document(impulses={"times": {"periodic": {"period": 1}}, "lambda_x": ["0"]})
    with pytest.raises(SimConfigError, match="multiple of step"):
        simulate(load_model(doc), SimConfig(step=0.3, horizon=3))


def test_nonpositive_history_rejected():
    with pytest.raises(SimConfigError):
        simulate(_logistic(), SimConfig(step=0.1, horizon=1, initial_history=[0.0]))


def test_expression_history():
    tr = simulate(_logistic(), SimConfig(step=0.1, horizon=1, initial_history=["1 + 0.5*cos(t)"]))
    assert tr.z[0, 0] == 1.5


def test_seeded_history_reproducible():
    a = simulate(_logistic(), SimConfig(step=0.1, horizon=1, seed=3))
    b = simulate(_logistic(), SimConfig(step=0.1, horizon=1, seed=3))
    np.testing.assert_array_equal(a.states, b.states)
    assert 0.5 <= a.z[0, 0] <= 2.0


def test_discrete_single_species_fixed_point():
    tr = simulate(_logistic(b="0.1", a="0.096", kind="lattice"), SimConfig(horizon=2000, initial_history=[0.3]))
    assert tr.z[-1, 0] == pytest.approx(0.1 / 0.096, rel=1e-9)


def test_discrete_determinism(example2):
    cfg = SimConfig(horizon=200, seed=1)
    np.testing.assert_array_equal(simulate(example2, cfg).states, simulate(example2, cfg).states)


def test_example2_long_run_positive(example2):
    tr = simulate(example2, SimConfig(horizon=500))
    assert len(tr) >= 501
    assert np.all(tr.states > 0) and np.all(np.isfinite(tr.states))
    lo, hi = empirical_bounds(tr)
    assert np.all(hi < 5)


def test_discrete_lag_rounding_warning(example2):
    assert any("rounded" in w for w in simulate(example2, SimConfig(horizon=10)).warnings)
    doc = dict(example2.document)
    for k in ("tau", "delta", "xi", "eta"):
        doc[k] = [["1", "1"], ["1", "1"]]
    tr = simulate(load_model(doc), SimConfig(horizon=10))
    assert not any("rounded" in w for w in tr.warnings)


def test_identical_histories_zero_gap():
    rep = stability_gap(_logistic(), SimConfig(step=0.1, horizon=5), [0.5], [0.5])
    assert np.all(rep.g == 0) and rep.ratio == 0.0


def test_gap_decays_for_logistic():
    rep = stability_gap(_logistic(), SimConfig(step=0.05, horizon=20), [0.5], [3.0])
    assert rep.ratio < 1e-6
    assert rep.decay_rate == pytest.approx(2.0, rel=0.05)


def test_thin_keeps_impulse_pairs():
    doc = toy_document(impulses={"times": {"periodic": {"period": 1}}, "lambda_x": ["-0.1"]})
    tr = simulate(load_model(doc), SimConfig(step=0.1, horizon=5))
    th = tr.thin(7)
    assert th.impulse.sum() == tr.impulse.sum()
    assert th.t[-1] == tr.t[-1]
    with pytest.raises(ValueError):
        tr.thin(0)


def test_example1_h2_tail_inside_bounds(example1_h2):
    b = permanence_bounds(compute_stats(example1_h2))
    tr = simulate(example1_h2, SimConfig(step=0.01, horizon=40))
    lo, hi = empirical_bounds(tr)
    assert np.all(lo >= np.r_[b.x_lo, b.y_lo] - 0.05)
    assert np.all(hi <= np.r_[b.x_up, b.y_up] + 0.05)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.2, 3), st.floats(0.1, 5))
def test_discrete_positive_and_bounded(b, a, z0):
    tr = simulate(_logistic(b=repr(b), a=repr(a), kind="lattice"), SimConfig(horizon=100, initial_history=[z0]))
    assert np.all(tr.z > 0)
    # the Ricker map never exceeds exp(b - 1) / a after one step
    assert tr.z[1:].max() <= max(z0, math.exp(b - 1) / a) * (1 + 1e-12)
