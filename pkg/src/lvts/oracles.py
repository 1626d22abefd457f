"""Scalar oracles: simulated equality cases checked against closed-form bounds.

``comparison_oracle_31`` runs the delayed logistic equality case and checks
its tail against the asymptotic bounds of ``lvts.comparison``;
``comparison_oracle_27`` compares a simulated linear impulsive equation with
its closed-form variation-of-constants expression.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .comparison import ComparisonParams, lemma31_M, lemma31_m, lemma32_M, lemma32_m
from .timescale import TimeScaleSpec, delta_integral, exp_fn


@dataclass(frozen=True)
class ScalarSchedule:
    """Impulse instants with jumps x(t_k+) = d_k x(t_k) + b_k."""
    times: tuple[float, ...] = ()
    d: tuple[float, ...] = ()
    b: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.d) != len(self.times):
            raise ValueError("times and d must have equal length")
        if self.b and len(self.b) != len(self.times):
            raise ValueError("times and b must have equal length")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("impulse times must be strictly increasing")

    @classmethod
    def geometric(cls, period: float, count: int, c: float, q: float = 0.5, offset: float = 0.0):
        """d_k = 1 - c*q^k at offset + k*period, k = 1..count."""
        ks = range(1, count + 1)
        return cls(tuple(offset + k * period for k in ks), tuple(1.0 - c * q ** k for k in ks))

    def jump(self, k: int) -> tuple[float, float]:
        return self.d[k], (self.b[k] if self.b else 0.0)

    def prefix_bounds(self) -> tuple[float, float]:
        """(min, max) of the running products of d_k, the empty product included."""
        prods = np.concatenate([[1.0], np.cumprod(self.d)]) if self.d else np.array([1.0])
        return float(prods.min()), float(prods.max())


@dataclass(frozen=True)
class Check:
    name: str
    bound: float
    empirical: float
    satisfied: bool


@dataclass(frozen=True)
class OracleReport:
    mode: str
    params: ComparisonParams
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)


# ---------------------------------------------------------------- delayed logistic oracle

def _delay_values(tau: float | Callable, times: np.ndarray) -> np.ndarray:
    if callable(tau):
        return np.broadcast_to(np.asarray(tau(times), dtype=float), times.shape).copy()
    return np.full(times.shape, float(tau))


def _simulate_reals(p: ComparisonParams, tau, sched: ScalarSchedule, x0: float, h: float, horizon: float):
    from .sim import integrate_dde

    nsteps = int(round(horizon / h))
    grid = 0.5 * h * np.arange(2 * nsteps + 1)
    lag = grid - _delay_values(tau, grid)
    impulses = {}
    for tk, dk in zip(sched.times, sched.d):
        n = int(round(tk / h))
        if abs(n * h - tk) > 1e-9 * max(1.0, tk):
            raise ValueError(f"impulse time {tk} is not a multiple of step {h}")
        if 1 <= n <= nsteps:
            impulses[n] = np.array([dk])
    a, b, d = p.a, p.b, p.d
    comps = np.zeros(1, dtype=np.int64)
    t, Y, _ = integrate_dde(lambda idx, y, yl: y * (b - a * yl) + d, lambda idx: lag[idx:idx + 1],
                            comps, np.array([x0]), lambda ts_, c: np.full(ts_.shape, x0),
                            0.0, h, nsteps, float((grid - lag).max()), impulses)
    return t, Y[:, 0]


def _simulate_lattice(p: ComparisonParams, tau, sched: ScalarSchedule, x0: float, h: float,
                      horizon: float, sigma_form: bool):
    nsteps = int(round(horizon / h))
    times = h * np.arange(nsteps)
    lag = np.rint(_delay_values(tau, times) / h).astype(np.int64)
    jumps = {int(round(tk / h)): dk for tk, dk in zip(sched.times, sched.d)}
    x = np.empty(nsteps + 1)
    x[0] = x0
    out_t, out_x = [0.0], [x0]
    a, b, d = p.a, p.b, p.d
    for n in range(nsteps):
        xl = x[n - lag[n]] if n - lag[n] >= 0 else x0
        if sigma_form:
            den = 1.0 - h * (b - a * xl)
            if den <= 0:
                raise ValueError(f"sigma-form recurrence undefined at t={times[n]} (1 - h(b - a x) = {den})")
            new = (x[n] + h * d) / den
        else:
            new = x[n] + h * (x[n] * (b - a * xl) + d)
        if not new > 0:
            raise ValueError(f"scalar state became nonpositive at t={(n + 1) * h}")
        out_t.append((n + 1) * h)
        out_x.append(new)
        if n + 1 in jumps:
            new *= jumps[n + 1]
            out_t.append((n + 1) * h)
            out_x.append(new)
        x[n + 1] = new
    return np.array(out_t), np.array(out_x)


def _tail(t: np.ndarray, x: np.ndarray, frac: float) -> np.ndarray:
    return x[t >= frac * t[-1]]


def comparison_oracle_31(p: ComparisonParams, mode: str = "both", schedule: ScalarSchedule | None = None,
                         ts: TimeScaleSpec | None = None, tau: float | Callable | None = None,
                         horizon: float = 60.0, step: float = 0.02, x0: float | None = None,
                         N: float | None = None, rtol: float = 1e-3, transient_fraction: float = 0.5
                         ) -> OracleReport:
    """Simulate x' = x (b - a x(t - tau)) + d with jumps x(t_k+) = d_k x(t_k) and check the tail.

    ``tau`` defaults to the constant p.tau_bar (a callable must stay within [0, p.tau_bar]).
    On a lattice both right-hand side forms are run: x^sigma (b - a x_tau) against the
    lemma31 upper / lemma32 lower bounds and x (b - a x_tau) against the lemma31 lower /
    lemma32 upper bounds.  alpha and beta are taken from the schedule's running products.
    ``N`` defaults to the empirical limsup inflated by ``rtol``.
    """
    if mode not in ("upper", "lower", "both"):
        raise ValueError(f"mode must be upper, lower or both, got {mode!r}")
    ts = ts or TimeScaleSpec.reals()
    sched = schedule or ScalarSchedule()
    if any(not 0 < dk <= 1 for dk in sched.d):
        raise ValueError("impulse factors must lie in (0, 1]")
    alpha, beta = sched.prefix_bounds()
    p = p.with_(alpha=alpha, beta=beta, mu_bar=ts.graininess_sup)
    tau = p.tau_bar if tau is None else tau
    x0 = p.b / p.a if x0 is None else x0
    checks = []

    def upper(name, fn, sup):
        bound = fn(p)
        checks.append(Check(name, bound, sup, sup <= bound * (1 + rtol)))

    def lower(name, fn, inf, sup):
        pn = p.with_(N=N if N is not None else sup * (1 + rtol))
        bound = fn(pn)
        checks.append(Check(name, bound, inf, inf >= bound * (1 - rtol)))

    if ts.is_lattice:
        h = ts.step
        ts_, xs = _simulate_lattice(p, tau, sched, x0, h, horizon, sigma_form=True)
        tx, xx = _simulate_lattice(p, tau, sched, x0, h, horizon, sigma_form=False)
        ts_tail, tx_tail = _tail(ts_, xs, transient_fraction), _tail(tx, xx, transient_fraction)
        if mode in ("upper", "both"):
            upper("lemma31_M", lemma31_M, float(ts_tail.max()))
            upper("lemma32_M", lemma32_M, float(tx_tail.max()))
        if mode in ("lower", "both"):
            lower("lemma31_m", lemma31_m, float(tx_tail.min()), float(tx_tail.max()))
            lower("lemma32_m", lemma32_m, float(ts_tail.min()), float(ts_tail.max()))
    else:
        t, x = _simulate_reals(p, tau, sched, x0, step, horizon)
        tail = _tail(t, x, transient_fraction)
        if mode in ("upper", "both"):
            upper("lemma31_M", lemma31_M, float(tail.max()))
        if mode in ("lower", "both"):
            lower("lemma31_m", lemma31_m, float(tail.min()), float(tail.max()))
    return OracleReport(mode, p, tuple(checks))


# ---------------------------------------------------------------- linear impulsive oracle

def _as_vector(fn: Callable) -> Callable:
    def g(s):
        if np.ndim(s):
            return np.array([fn(float(v)) for v in np.ravel(s)]).reshape(np.shape(s))
        return fn(float(s))
    return g


def lemma27_closed_form(ts: TimeScaleSpec, p_fn: Callable, q_fn: Callable, schedule: ScalarSchedule,
                        t0: float, t: float, x0: float, steps: int | None = None) -> float:
    """x0 prod d_k e_p(t,t0) + sum prod d_j e_p(t,t_k) b_k + int prod d_k e_p(t,sigma(s)) q(s) ds.

    Products run over impulse instants strictly between the lower limit and t.
    """
    inside = [k for k, tk in enumerate(schedule.times) if t0 < tk < t]

    def prod_after(s: float) -> float:
        return math.prod(schedule.d[k] for k in inside if schedule.times[k] > s)

    terms = [x0 * prod_after(t0) * exp_fn(ts, p_fn, t, t0, steps)]
    for k in inside:
        _, bk = schedule.jump(k)
        if bk:
            terms.append(prod_after(schedule.times[k]) * exp_fn(ts, p_fn, t, schedule.times[k], steps) * bk)
    h = ts.graininess_sup
    cuts = [t0] + [schedule.times[k] for k in inside] + [t]
    for lo, hi in zip(cuts, cuts[1:]):
        factor = prod_after(hi - 0.5 * h) if h else prod_after(0.5 * (lo + hi))
        if factor == 0:
            continue
        integrand = _as_vector(lambda s: exp_fn(ts, p_fn, t, s + h, steps) * q_fn(s))
        terms.append(factor * delta_integral(ts, integrand, lo, hi, steps))
    return math.fsum(terms)


def comparison_oracle_27(p_fn: Callable, q_fn: Callable, schedule: ScalarSchedule, ts: TimeScaleSpec,
                         t0: float, t: float, x0: float = 1.0, steps: int | None = None
                         ) -> tuple[float, float]:
    """(simulated, closed_form) for x^Delta = p x + q with x(t_k+) = d_k x(t_k) + b_k."""
    ts.check(t0)
    ts.check(t)
    inside = [k for k, tk in enumerate(schedule.times) if t0 < tk < t]
    x = float(x0)
    if ts.is_lattice:
        h = ts.step
        jumps = {ts.index(schedule.times[k]): schedule.jump(k) for k in inside}
        for i in range(ts.index(t0), ts.index(t)):
            s = i * h
            x = (1.0 + h * p_fn(s)) * x + h * q_fn(s)
            if i + 1 in jumps:
                dk, bk = jumps[i + 1]
                x = dk * x + bk
    else:
        cuts = [t0] + [schedule.times[k] for k in inside] + [t]
        for idx, (lo, hi) in enumerate(zip(cuts, cuts[1:])):
            sol = solve_ivp(lambda s, y: p_fn(s) * y + q_fn(s), (lo, hi), [x], method="DOP853",
                            rtol=1e-12, atol=1e-14)
            if not sol.success:
                raise RuntimeError(sol.message)
            x = float(sol.y[0, -1])
            if idx < len(inside):
                dk, bk = schedule.jump(inside[idx])
                x = dk * x + bk
    return x, lemma27_closed_form(ts, p_fn, q_fn, schedule, t0, t, x0, steps)


__all__: Sequence[str] = (
    "ScalarSchedule", "Check", "OracleReport", "comparison_oracle_31",
    "comparison_oracle_27", "lemma27_closed_form",
)
