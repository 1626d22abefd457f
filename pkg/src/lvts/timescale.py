"""Time-scale calculus on the reals and on uniform lattices h*Z.

Only two kinds of time scale are supported: the real line (graininess 0)
and the lattice {k*h : k integer} (graininess h).  Functions of time are
plain callables; anything that accepts a numpy array is evaluated in one
vectorized call, everything else point by point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

ScalarFn = Callable[[float], float]

REALS = "reals"
LATTICE = "lattice"

# relative tolerance (in units of the step) for lattice membership
GRID_TOL = 1e-9


class TimeScaleError(ValueError):
    """A time is off the time scale or an interval is malformed."""


class RegressivityError(ValueError):
    """1 + mu*p vanished (or went nonpositive where positivity is required)."""

    def __init__(self, message: str, point: float | None = None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class TimeScaleSpec:
    kind: str = REALS
    step: float = 1.0

    def __post_init__(self):
        if self.kind not in (REALS, LATTICE):
            raise TimeScaleError(f"unknown time scale kind {self.kind!r}")
        if self.kind == LATTICE and not self.step > 0:
            raise TimeScaleError(f"lattice step must be positive, got {self.step}")

    @classmethod
    def reals(cls) -> "TimeScaleSpec":
        return cls(REALS, 1.0)

    @classmethod
    def lattice(cls, step: float = 1.0) -> "TimeScaleSpec":
        return cls(LATTICE, float(step))

    @property
    def is_lattice(self) -> bool:
        return self.kind == LATTICE

    @property
    def graininess_sup(self) -> float:
        return self.step if self.is_lattice else 0.0

    def index(self, t: float) -> int:
        """Lattice index of ``t``; raises if ``t`` is not a grid point."""
        if not self.is_lattice:
            raise TimeScaleError("index() is only defined on a lattice")
        k = round(t / self.step)
        if abs(t - k * self.step) > GRID_TOL * self.step:
            raise TimeScaleError(f"t={t!r} is not on the lattice with step {self.step}")
        return int(k)

    def check(self, t: float) -> None:
        if self.is_lattice:
            self.index(t)
        elif not math.isfinite(t):
            raise TimeScaleError(f"t={t!r} is not a finite real")

    def points(self, a: float, b: float, include_end: bool = True) -> np.ndarray:
        """Lattice points in [a, b] (or [a, b) with ``include_end=False``)."""
        ka, kb = self.index(a), self.index(b)
        if not include_end:
            kb -= 1
        return np.arange(ka, kb + 1, dtype=float) * self.step

    def to_dict(self) -> dict:
        if self.is_lattice:
            return {"kind": LATTICE, "step": self.step}
        return {"kind": REALS}


def graininess(ts: TimeScaleSpec, t: float) -> float:
    ts.check(t)
    return ts.graininess_sup


def sigma(ts: TimeScaleSpec, t: float) -> float:
    """Forward jump operator."""
    ts.check(t)
    if ts.is_lattice:
        return (ts.index(t) + 1) * ts.step
    return t


def rho(ts: TimeScaleSpec, t: float) -> float:
    """Backward jump operator."""
    ts.check(t)
    if ts.is_lattice:
        return (ts.index(t) - 1) * ts.step
    return t


def cylinder(h: float, z: float) -> float:
    if h < 0:
        raise ValueError(f"graininess must be nonnegative, got {h}")
    if h == 0:
        return z
    arg = 1.0 + h * z
    if arg <= 0:
        raise RegressivityError(f"1 + h*z = {arg!r} <= 0 for h={h}, z={z}")
    return math.log1p(h * z) / h


def oplus(p: float, q: float, mu: float) -> float:
    return p + q + mu * p * q


def ominus(p: float, mu: float) -> float:
    den = 1.0 + mu * p
    if np.any(den == 0):
        raise RegressivityError(f"1 + mu*p = 0 for p={p}, mu={mu}")
    return -p / den


def osub(p: float, q: float, mu: float) -> float:
    """p (-) q = p (+) ((-) q) = (p - q) / (1 + mu q)."""
    den = 1.0 + mu * q
    if np.any(den == 0):
        raise RegressivityError(f"1 + mu*q = 0 for q={q}, mu={mu}")
    return (p - q) / den


def evaluate_many(f: ScalarFn, ts_: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on an array of times, vectorized when ``f`` allows it."""
    ts_ = np.asarray(ts_, dtype=float)
    try:
        # scalar-only callables (math.*) would otherwise convert size-1 arrays with a warning
        with warnings.catch_warnings():
            warnings.simplefilter("error", DeprecationWarning)
            out = np.asarray(f(ts_), dtype=float)
    except (TypeError, ValueError, DeprecationWarning):
        out = None
    if out is None or out.shape not in (ts_.shape, ()):
        return np.array([float(f(float(t))) for t in ts_.ravel()]).reshape(ts_.shape)
    return np.broadcast_to(out, ts_.shape).astype(float, copy=True)


def is_positively_regressive(ts: TimeScaleSpec, p: ScalarFn, interval: tuple[float, float],
                             samples: int = 1000) -> bool:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    a, b = interval
    if ts.is_lattice:
        grid = ts.points(a, b)
    else:
        grid = np.linspace(a, b, samples) if b > a else np.array([a])
    vals = evaluate_many(p, grid)
    if not np.all(np.isfinite(vals)):
        return False
    return bool(np.all(1.0 + ts.graininess_sup * vals > 0))


def default_panels(s: float, t: float) -> int:
    return max(100, int(math.ceil(10 * (t - s))))


def simpson(f: ScalarFn, s: float, t: float, panels: int) -> float:
    """Composite Simpson rule; each panel spans two subintervals."""
    if t == s:
        return 0.0
    x = np.linspace(s, t, 2 * panels + 1)
    y = evaluate_many(f, x)
    hx = (t - s) / (2 * panels)
    return float(hx / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def delta_integral(ts: TimeScaleSpec, f: ScalarFn, s: float, t: float, steps: int | None = None) -> float:
    if s > t:
        raise TimeScaleError(f"delta_integral needs s <= t, got s={s}, t={t}")
    ts.check(s)
    ts.check(t)
    if ts.is_lattice:
        if s == t:
            return 0.0
        grid = ts.points(s, t, include_end=False)
        return ts.step * math.fsum(evaluate_many(f, grid))
    return simpson(f, s, t, steps or default_panels(s, t))


def _lattice_log_exp(ts: TimeScaleSpec, p: ScalarFn, s: float, t: float) -> float:
    # e_p(t, s) for s < t as the product of (1 + h p(tau)), tau = s, s+h, ..., t-h
    grid = ts.points(s, t, include_end=False)
    factors = 1.0 + ts.step * evaluate_many(p, grid)
    zero = np.flatnonzero(factors == 0)
    if zero.size:
        bad = float(grid[zero[0]])
        raise RegressivityError(f"1 + mu*p vanishes at t={bad}", point=bad)
    direct = math.prod(factors.tolist())
    if np.all(factors > 0) and not (0.0 < direct < math.inf and abs(direct) >= 1e-300):
        # log space keeps long products from overflowing or underflowing
        return math.exp(math.fsum(np.log(factors)))
    return direct


def exp_fn(ts: TimeScaleSpec, p: ScalarFn, t: float, s: float, steps: int | None = None) -> float:
    """Generalized exponential e_p(t, s)."""
    ts.check(s)
    ts.check(t)
    if t == s:
        return 1.0
    if ts.is_lattice:
        if ts.index(t) == ts.index(s):
            return 1.0
        if t > s:
            return _lattice_log_exp(ts, p, s, t)
        return 1.0 / _lattice_log_exp(ts, p, t, s)
    if t > s:
        return math.exp(delta_integral(ts, p, s, t, steps))
    return math.exp(-delta_integral(ts, p, t, s, steps))


Number = Union[int, float]


def constant(c: Number) -> ScalarFn:
    """A constant rate usable by the vectorized evaluators."""
    c = float(c)

    def f(t):
        return np.full(np.shape(t), c) if np.ndim(t) else c

    return f
