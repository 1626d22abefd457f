"""Trajectory simulation in population form.

On the reals the delay system u_i' = u_i (g_i + sum_j K_ij u_j(t - D_ij)) is
integrated with a fixed-step classical Runge-Kutta scheme; on a lattice the
exponential recurrence u(t+h) = u(t) exp(h * rate) is iterated exactly.
Here u = (z, w), g = (b, -r), K = [[-a, -c], [d, -e]], D = [[tau, delta], [xi, eta]].
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .expr import Node, evaluate, parse_expr
from .model import ModelSpec

DEFAULT_STEP = 0.01
ALIGN_TOL = 1e-9


class SimConfigError(ValueError):
    """Invalid simulation settings (step, alignment, initial history)."""


class SimulationError(RuntimeError):
    """A state component went nonpositive."""

    def __init__(self, message: str, time: float, species: int):
        super().__init__(message)
        self.time = time
        self.species = species


class HistoryError(RuntimeError):
    """A delayed lookup fell outside the stored history (internal invariant breach)."""


@dataclass(frozen=True)
class SimConfig:
    step: float | None = None          # reals only; lattice runs use the lattice step
    horizon: float = 100.0
    initial_history: Sequence[float | str] | None = None
    transient_fraction: float = 0.5
    seed: int | None = None
    interpolation: str = "hermite"     # hermite | linear | hold-left

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise SimConfigError(f"step must be positive, got {self.step}")
        if not self.horizon > 0:
            raise SimConfigError(f"horizon must be positive, got {self.horizon}")
        if not 0 < self.transient_fraction < 1:
            raise SimConfigError("transient_fraction must lie in (0, 1)")
        if self.interpolation not in ("hermite", "linear", "hold-left"):
            raise SimConfigError(f"unknown interpolation {self.interpolation!r}")

    def to_dict(self) -> dict:
        hist = None if self.initial_history is None else [
            x if isinstance(x, str) else float(x) for x in self.initial_history]
        return {"step": self.step, "horizon": self.horizon, "initial_history": hist,
                "transient_fraction": self.transient_fraction, "seed": self.seed,
                "interpolation": self.interpolation}


# ---------------------------------------------------------------- trajectory

@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    states: np.ndarray          # (samples, n + m), population form
    impulse: np.ndarray         # True on the post-impulse row of each pre/post pair
    n: int
    m: int
    model_hash: str = ""
    config: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        for arr in (self.t, self.states, self.impulse):
            arr.setflags(write=False)

    @property
    def z(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def w(self) -> np.ndarray:
        return self.states[:, self.n:]

    @property
    def log_states(self) -> np.ndarray:
        return np.log(self.states)

    def __len__(self) -> int:
        return len(self.t)

    def header(self) -> list[str]:
        return (["t"] + [f"z{i + 1}" for i in range(self.n)]
                + [f"w{j + 1}" for j in range(self.m)] + ["impulse"])

    def to_csv(self, target: str | Path | io.TextIOBase | None = None) -> str | None:
        """Write the CSV to ``target``; with no target return it as a string."""
        buf = io.StringIO() if target is None else None
        fh = buf if buf is not None else (target if hasattr(target, "write") else open(target, "w", newline=""))
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            for t, row, flag in zip(self.t, self.states, self.impulse):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row] + [int(flag)])
        finally:
            if buf is None and not hasattr(target, "write"):
                fh.close()
        return buf.getvalue() if buf is not None else None

    def thin(self, every: int) -> "Trajectory":
        """Keep every ``every``-th row, the last row and all impulse pairs."""
        if every < 1:
            raise ValueError("every must be >= 1")
        keep = np.zeros(len(self.t), dtype=bool)
        keep[::every] = True
        keep[-1] = True
        post = np.flatnonzero(self.impulse)
        keep[post] = True
        keep[post - 1] = True
        return replace(self, t=self.t[keep].copy(), states=self.states[keep].copy(),
                       impulse=self.impulse[keep].copy())


# ---------------------------------------------------------------- history

def _history_function(model: ModelSpec, cfg: SimConfig) -> tuple[Callable, np.ndarray]:
    """phi(times, comps) for t <= t0 and the state at t0."""
    N = model.species
    items = cfg.initial_history
    if items is None:
        if cfg.seed is None:
            items = [1.0] * N
        else:
            items = list(np.random.default_rng(cfg.seed).uniform(0.5, 2.0, N))
    if len(items) != N:
        raise SimConfigError(f"initial_history needs {N} entries, got {len(items)}")
    consts = np.zeros(N)
    nodes: list[Node | None] = [None] * N
    for i, item in enumerate(items):
        if isinstance(item, str):
            try:
                nodes[i] = parse_expr(item)
            except ValueError as exc:
                raise SimConfigError(f"initial_history[{i}]: {exc}") from exc
        else:
            consts[i] = float(item)
    y0 = np.array([evaluate(nd, model.t0) if nd is not None else consts[i] for i, nd in enumerate(nodes)])
    if not np.all(y0 > 0):
        bad = int(np.flatnonzero(~(y0 > 0))[0])
        raise SimConfigError(f"initial history of species {bad + 1} must be positive at t0, got {y0[bad]}")
    if all(nd is None for nd in nodes):
        return (lambda times, comps: consts[comps]), y0

    def phi(times, comps):
        out = consts[comps].copy()
        for i, nd in enumerate(nodes):
            sel = comps == i
            if nd is not None and sel.any():
                out[sel] = evaluate(nd, times[sel])
        return out

    return phi, y0


class HistoryBuffer:
    """Past states: the initial function before t0, then one dense-output segment per step.

    Completed steps are interpolated by cubic Hermite (default), linear or
    hold-left rules; lookups inside the step being computed use an Euler
    extrapolation from its left end.
    """

    def __init__(self, phi: Callable, t0: float, step: float, capacity: int, dim: int,
                 span: float, interpolation: str = "hermite"):
        self.phi, self.t0, self.h, self.span = phi, t0, step, span
        self.interpolation = interpolation
        self.ya = np.empty((capacity, dim))
        self.yb = np.empty((capacity, dim))
        self.fa = np.empty((capacity, dim))
        self.fb = np.empty((capacity, dim))
        self.count = 0

    def push(self, ya, yb, fa, fb) -> None:
        k = self.count
        self.ya[k], self.yb[k], self.fa[k], self.fb[k] = ya, yb, fa, fb
        self.count += 1

    def lookup(self, times: np.ndarray, comps: np.ndarray, s: float, y_stage: np.ndarray,
               y_open: np.ndarray, f_open: np.ndarray) -> np.ndarray:
        out = np.empty(times.shape)
        if times.min() < self.t0 - self.span - ALIGN_TOL:
            raise HistoryError(f"lookup at t={times.min()} precedes the history window")
        pos = (times - self.t0) / self.h
        k = np.floor(pos).astype(np.int64)
        pre = times <= self.t0
        cur = times >= s - 1e-14 * max(1.0, abs(s))       # zero effective delay
        opn = ~pre & ~cur & (k >= self.count)
        old = ~pre & ~cur & ~opn
        if pre.any():
            out[pre] = self.phi(times[pre], comps[pre])
        if cur.any():
            out[cur] = y_stage[comps[cur]]
        if opn.any():
            c = comps[opn]
            t_open = self.t0 + self.count * self.h
            out[opn] = y_open[c] + (times[opn] - t_open) * f_open[c]
        if old.any():
            kk, c = k[old], comps[old]
            th = pos[old] - kk
            ya, yb = self.ya[kk, c], self.yb[kk, c]
            if self.interpolation == "hermite":
                th2, th3 = th * th, th * th * th
                out[old] = ((2 * th3 - 3 * th2 + 1) * ya + (th3 - 2 * th2 + th) * self.h * self.fa[kk, c]
                            + (3 * th2 - 2 * th3) * yb + (th3 - th2) * self.h * self.fb[kk, c])
            elif self.interpolation == "linear":
                out[old] = (1 - th) * ya + th * yb
            else:
                out[old] = ya
        return out


# ---------------------------------------------------------------- engine

def _impulse_steps(model: ModelSpec, t0: float, h: float, nsteps: int) -> dict[int, np.ndarray]:
    """Step index n (impulse at t0 + n*h) -> componentwise multiplier 1 + lambda."""
    out = {}
    for k, tk in model.impulses.times_between(t0, t0 + nsteps * h):
        q = (tk - t0) / h
        n = int(round(q))
        if abs(q - n) > ALIGN_TOL * max(1.0, abs(q)) or n < 1:
            raise SimConfigError(f"impulse time t_{k}={tk} is not a multiple of step {h} from t0={t0}")
        if n > nsteps:
            continue
        lam = np.array([model.impulses.lambdas(s, [k])[0] for s in range(model.species)])
        out[n] = 1.0 + lam
    return out


def _check_positive(y: np.ndarray, t: float) -> None:
    if not np.all(y > 0):
        i = int(np.flatnonzero(~(y > 0))[0])
        raise SimulationError(f"state of species {i + 1} became nonpositive ({y[i]!r}) at t={t}", t, i)


def integrate_dde(rhs: Callable, lag_times: Callable, comps: np.ndarray, y0: np.ndarray, phi: Callable,
                  t0: float, h: float, nsteps: int, span: float, impulses: dict[int, np.ndarray] | None = None,
                  interpolation: str = "hermite", positive: bool = True):
    """Fixed-step RK4 for y' = rhs(idx, y, ylag) with ylag[p] = y_{comps[p]}(lag_times(idx)[p]).

    ``idx`` indexes the half-step grid t0 + idx*h/2.  Returns (t, Y, flags) with
    a pre/post row pair at every impulse step.
    """
    impulses = impulses or {}
    hist = HistoryBuffer(phi, t0, h, nsteps, len(y0), span, interpolation)
    zero = np.zeros_like(y0)
    rows_t, rows_y, flags = [t0], [y0.copy()], [False]
    y = y0.astype(float).copy()

    def f(idx, yy, s, k1):
        lt = lag_times(idx)
        return rhs(idx, yy, hist.lookup(lt, comps, s, yy, y, k1))

    k1 = f(0, y, t0, zero)
    for n in range(nsteps):
        t = t0 + n * h
        i0 = 2 * n
        k2 = f(i0 + 1, y + 0.5 * h * k1, t + 0.5 * h, k1)
        k3 = f(i0 + 1, y + 0.5 * h * k2, t + 0.5 * h, k1)
        k4 = f(i0 + 2, y + h * k3, t + h, k1)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_new = t0 + (n + 1) * h
        if positive:
            _check_positive(y_new, t_new)
        f_end = f(i0 + 2, y_new, t_new, k1)
        hist.push(y, y_new, k1, f_end)
        rows_t.append(t_new)
        rows_y.append(y_new)
        flags.append(False)
        mult = impulses.get(n + 1)
        if mult is not None:
            y_new = y_new * mult
            if positive:
                _check_positive(y_new, t_new)
            rows_t.append(t_new)
            rows_y.append(y_new)
            flags.append(True)
            y = y_new
            k1 = f(i0 + 2, y, t_new, zero)
        else:
            y = y_new
            k1 = f_end
    return np.array(rows_t), np.array(rows_y), np.array(flags, dtype=bool)


# ---------------------------------------------------------------- LV systems

def _coefficient_arrays(model: ModelSpec, times: np.ndarray):
    N = model.species
    g = np.empty((len(times), N))
    for i, (node, sign) in enumerate(model.growth()):
        g[:, i] = sign * evaluate(node, times)
    K = np.empty((len(times), N, N))
    for i, row in enumerate(model.interaction()):
        for j, (node, sign) in enumerate(row):
            K[:, i, j] = sign * evaluate(node, times)
    D = np.empty((len(times), N, N))
    for i, row in enumerate(model.delays()):
        for j, node in enumerate(row):
            D[:, i, j] = evaluate(node, times)
    return g, K, D


def simulate_continuous(model: ModelSpec, cfg: SimConfig) -> Trajectory:
    if model.ts.is_lattice:
        raise SimConfigError("simulate_continuous needs a model on the reals")
    h = cfg.step or DEFAULT_STEP
    nsteps = int(round(cfg.horizon / h))
    t0, N = model.t0, model.species
    impulses = _impulse_steps(model, t0, h, max(nsteps, 1))
    if abs(nsteps * h - cfg.horizon) > ALIGN_TOL * max(1.0, cfg.horizon) or nsteps < 1:
        raise SimConfigError(f"horizon {cfg.horizon} is not a multiple of step {h}")
    phi, y0 = _history_function(model, cfg)
    grid = t0 + 0.5 * h * np.arange(2 * nsteps + 1)
    g, K, D = _coefficient_arrays(model, grid)
    if np.any(D < 0):
        raise SimConfigError("negative delay encountered")
    lag = grid[:, None, None] - D
    comps = np.tile(np.arange(N), N)
    span = float(D.max()) if D.size else 0.0

    def lag_times(idx):
        return lag[idx].ravel()

    def rhs(idx, y, ylag):
        return y * (g[idx] + (K[idx] * ylag.reshape(N, N)).sum(axis=1))

    t, Y, flags = integrate_dde(rhs, lag_times, comps, y0, phi, t0, h, nsteps, span, impulses,
                                cfg.interpolation)
    return Trajectory(t, Y, flags, model.n, model.m, model.model_hash(),
                      {**cfg.to_dict(), "step": h}, ())


def simulate_discrete(model: ModelSpec, cfg: SimConfig) -> Trajectory:
    if not model.ts.is_lattice:
        raise SimConfigError("simulate_discrete needs a model on a lattice")
    h = model.ts.step
    warnings = []
    if cfg.step is not None and abs(cfg.step - h) > ALIGN_TOL * h:
        warnings.append(f"step {cfg.step} ignored; lattice step is {h}")
    nsteps = int(round(cfg.horizon / h))
    t0, N = model.t0, model.species
    impulses = _impulse_steps(model, t0, h, nsteps)
    phi, y0 = _history_function(model, cfg)
    times = t0 + h * np.arange(nsteps)
    g, K, D = _coefficient_arrays(model, times)
    ratio = D / h
    lag = np.rint(ratio).astype(np.int64)
    off = np.abs(ratio - lag) > ALIGN_TOL
    if off.any():
        n_, i_, j_ = (int(v[0]) for v in np.nonzero(off))
        warnings.append(f"delays off the lattice rounded to whole steps ({off.sum()} entries; "
                        f"first at t={times[n_]}, entry ({i_ + 1},{j_ + 1}): {D[n_, i_, j_]} -> {lag[n_, i_, j_]} steps)")
    cols = np.broadcast_to(np.arange(N), (N, N))
    U = np.empty((nsteps + 1, N))      # post-impulse states on the lattice
    U[0] = y0
    rows_t, rows_y, flags = [t0], [y0.copy()], [False]
    for n in range(nsteps):
        idx = n - lag[n]
        if idx.min() < 0:
            Ud = np.where(idx >= 0, U[np.maximum(idx, 0), cols],
                          phi(t0 + h * idx.ravel(), cols.ravel()).reshape(N, N))
        else:
            Ud = U[idx, cols]
        rate = g[n].copy()
        for j in range(N):
            rate += K[n][:, j] * Ud[:, j]
        new = np.array([U[n, i] * math.exp(h * rate[i]) for i in range(N)])
        t_new = t0 + (n + 1) * h
        _check_positive(new, t_new)
        rows_t.append(t_new)
        rows_y.append(new)
        flags.append(False)
        mult = impulses.get(n + 1)
        if mult is not None:
            new = new * mult
            _check_positive(new, t_new)
            rows_t.append(t_new)
            rows_y.append(new)
            flags.append(True)
        U[n + 1] = new
    return Trajectory(np.array(rows_t), np.array(rows_y), np.array(flags, dtype=bool), model.n, model.m,
                      model.model_hash(), {**cfg.to_dict(), "step": h}, tuple(warnings))


def simulate(model: ModelSpec, cfg: SimConfig) -> Trajectory:
    if model.ts.is_lattice:
        return simulate_discrete(model, cfg)
    return simulate_continuous(model, cfg)


# ---------------------------------------------------------------- empirical checks

def empirical_bounds(traj: Trajectory, transient_fraction: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Per-species (lo, hi) of the log-state over the tail of the run."""
    t0, t1 = traj.t[0], traj.t[-1]
    tail = traj.t >= t0 + transient_fraction * (t1 - t0)
    if not tail.any():
        raise ValueError("empty tail")
    logs = traj.log_states[tail]
    return logs.min(axis=0), logs.max(axis=0)


@dataclass(frozen=True, eq=False)
class GapReport:
    t: np.ndarray
    g: np.ndarray
    ratio: float
    decay_rate: float          # least-squares slope of -ln g over the tail; nan if undefined
    traj_a: Trajectory
    traj_b: Trajectory

    def to_dict(self) -> dict:
        return {"g0": float(self.g[0]), "g_end": float(self.g[-1]), "ratio": self.ratio,
                "decay_rate": None if math.isnan(self.decay_rate) else self.decay_rate}


def stability_gap(model: ModelSpec, cfg: SimConfig, init_a, init_b) -> GapReport:
    ta = simulate(model, replace(cfg, initial_history=init_a))
    tb = simulate(model, replace(cfg, initial_history=init_b))
    g = np.abs(ta.log_states - tb.log_states).sum(axis=1)
    ratio = float(g[-1] / g[0]) if g[0] > 0 else 0.0
    rate = math.nan
    # fit ln g where it sits above round-off; fall back to the whole run if the tail is at the floor
    above = g > 1e-12 * max(g[0], 1e-300)
    sel = above & (ta.t >= ta.t[0] + cfg.transient_fraction * (ta.t[-1] - ta.t[0]))
    if sel.sum() < 2:
        sel = above
    if sel.sum() >= 2 and np.ptp(ta.t[sel]) > 0:
        rate = float(-np.polyfit(ta.t[sel], np.log(g[sel]), 1)[0])
    return GapReport(ta.t, g, ratio, rate, ta, tb)


from .oracles import comparison_oracle_27, comparison_oracle_31, lemma27_closed_form  # noqa: E402,F401
