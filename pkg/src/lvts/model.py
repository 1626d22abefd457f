"""Model documents, impulse schedules and coefficient statistics.

A model is a JSON document (see ``docs/model_schema.md``) describing an
n-prey / m-predator system: coefficient and delay matrices as expression
strings in ``t``, and impulse multipliers as expression strings in the
impulse index ``k``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .expr import Node, derivative, enclose, evaluate, has_var, parse_expr, render
from .timescale import LATTICE, REALS, TimeScaleError, TimeScaleSpec

COEFFS = ("b", "r", "a", "c", "d", "e")
DELAYS = ("tau", "delta", "xi", "eta")
SCALAR_OVERRIDES = (
    "r", "r_hi",
    "tau_plus", "tau_minus", "delta_plus", "delta_minus",
    "xi_plus", "xi_minus", "eta_plus", "eta_minus",
    "tau_delta", "delta_delta", "xi_delta", "eta_delta",
)


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class SamplingConfig:
    window: float = 2000.0      # time units sampled from t0
    density: int = 40           # grid points per time unit (reals)
    refine: int = 4             # density multiplier of the local refinement pass
    candidates: int = 8         # grid local extrema refined per side
    snap_tol: float = 1e-6      # snap to the interval enclosure when this close
    impulse_horizon: int = 200  # impulses scanned for product bounds and H2


class Extremes(NamedTuple):
    sup: float
    inf: float
    outer_lo: float
    outer_hi: float


def _sample_grid(ts: TimeScaleSpec, cfg: SamplingConfig, t0: float) -> np.ndarray:
    if ts.is_lattice:
        k0 = math.ceil(t0 / ts.step - 1e-9)
        k1 = math.floor((t0 + cfg.window) / ts.step + 1e-9)
        return np.arange(k0, k1 + 1, dtype=float) * ts.step
    npts = int(round(cfg.window * cfg.density)) + 1
    return np.linspace(t0, t0 + cfg.window, npts)


def _polish(f, grid: np.ndarray, vals: np.ndarray, sign: float, cfg: SamplingConfig) -> float:
    """Best value of sign*f near the top grid candidates (refined grid + bounded Brent)."""
    s = sign * vals
    interior = np.flatnonzero((s[1:-1] >= s[:-2]) & (s[1:-1] >= s[2:])) + 1
    cand = np.concatenate([interior, [0, len(grid) - 1]])
    cand = cand[np.argsort(-s[cand])][: cfg.candidates]
    best = float(s.max())
    for i in cand:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        if hi <= lo:
            continue
        fine = np.linspace(lo, hi, 2 * cfg.refine + 1)
        fv = sign * evaluate(f, fine)
        j = int(np.argmax(fv))
        best = max(best, float(fv[j]))
        a, b = fine[max(j - 1, 0)], fine[min(j + 1, len(fine) - 1)]
        if b > a:
            res = minimize_scalar(lambda x: -sign * evaluate(f, x), bounds=(a, b),
                                  method="bounded", options={"xatol": 1e-12})
            if np.isfinite(res.fun):
                best = max(best, float(-res.fun))
    return sign * best


def _snap(value: float, bound: float, cfg: SamplingConfig) -> float:
    if math.isfinite(bound) and abs(bound - value) <= cfg.snap_tol * max(1.0, abs(bound)):
        return bound
    return value


def extremes(expr: Node, ts: TimeScaleSpec, cfg: SamplingConfig | None = None, t0: float = 0.0) -> Extremes:
    """(sup, inf) of ``expr`` over the sample window, with an interval outer bound."""
    cfg = cfg or SamplingConfig()
    outer = enclose(expr, t0, t0 + cfg.window)
    if not has_var(expr):
        v = evaluate(expr, t0)
        return Extremes(v, v, v, v)
    grid = _sample_grid(ts, cfg, t0)
    vals = evaluate(expr, grid)
    if ts.is_lattice:
        hi, lo = float(vals.max()), float(vals.min())
    else:
        hi = _polish(expr, grid, vals, 1.0, cfg)
        lo = _polish(expr, grid, vals, -1.0, cfg)
    hi = min(_snap(hi, outer.hi, cfg), outer.hi)
    lo = max(_snap(lo, outer.lo, cfg), outer.lo)
    return Extremes(hi, lo, outer.lo, outer.hi)


def abs_extremes(ex: Extremes) -> tuple[float, float]:
    """(sup |f|, inf |f|) from the signed extremes."""
    sup = max(abs(ex.sup), abs(ex.inf))
    inf = 0.0 if ex.inf <= 0.0 <= ex.sup else min(abs(ex.sup), abs(ex.inf))
    return sup, inf


def derivative_sup(expr: Node, ts: TimeScaleSpec, cfg: SamplingConfig | None = None, t0: float = 0.0) -> float:
    """sup of the delta derivative: symbolic on the reals, forward differences on a lattice."""
    cfg = cfg or SamplingConfig()
    if not has_var(expr):
        return 0.0
    if ts.is_lattice:
        grid = _sample_grid(ts, cfg, t0)
        vals = evaluate(expr, np.append(grid, grid[-1] + ts.step))
        return float(np.max(np.diff(vals) / ts.step))
    return extremes(derivative(expr), ts, cfg, t0).sup


# ---------------------------------------------------------------- impulses

@dataclass(frozen=True)
class ImpulseSchedule:
    """Impulse instants t_k (k = 1, 2, ...) and per-species multipliers 1 + lambda_k.

    Periodic schedules put t_k at ``offset + k*period``.
    """
    period: float | None = None
    offset: float = 0.0
    explicit: tuple[float, ...] | None = None
    lambda_x: tuple[Node, ...] = ()
    lambda_y: tuple[Node, ...] = ()

    @property
    def empty(self) -> bool:
        return self.period is None and not self.explicit

    def time(self, k: int) -> float:
        if self.period is not None:
            return self.offset + k * self.period
        return self.explicit[k - 1]

    def times_between(self, start: float, end: float, tol: float = 1e-9) -> list[tuple[int, float]]:
        """(k, t_k) for start < t_k <= end."""
        if self.empty:
            return []
        if self.period is not None:
            k = max(1, math.floor((start - self.offset) / self.period) + 1)
            out = []
            while True:
                tk = self.time(k)
                if tk > end + tol:
                    return out
                if tk > start + tol:
                    out.append((k, tk))
                k += 1
        return [(k, t) for k, t in enumerate(self.explicit, start=1) if start + tol < t <= end + tol]

    def min_gap(self) -> float:
        if self.period is not None:
            return self.period
        if not self.explicit or len(self.explicit) < 2:
            return math.inf
        return float(np.min(np.diff(self.explicit)))

    def species_lambda(self, species: int) -> Node | None:
        nx = len(self.lambda_x)
        if species < nx:
            return self.lambda_x[species]
        if species - nx < len(self.lambda_y):
            return self.lambda_y[species - nx]
        return None

    def lambdas(self, species: int, ks: Sequence[int] | np.ndarray) -> np.ndarray:
        node = self.species_lambda(species)
        ks = np.asarray(ks, dtype=float)
        if node is None:
            return np.zeros_like(ks)
        return evaluate(node, ks)

    def count(self, horizon_k: int) -> int:
        if self.empty:
            return 0
        if self.explicit is not None:
            return min(horizon_k, len(self.explicit))
        return horizon_k


def impulse_product_bound(sched: ImpulseSchedule, species: int, horizon_K: int) -> tuple[float, float]:
    """(min, max) over prefixes K' = 0..K of prod_{k<=K'} (1 + lambda_k)."""
    if horizon_K < 1:
        raise ValueError("horizon_K must be >= 1")
    K = sched.count(horizon_K)
    if K == 0:
        return 1.0, 1.0
    lam = sched.lambdas(species, np.arange(1, K + 1))
    bad = np.flatnonzero(~(lam > -1.0))
    if bad.size:
        k = int(bad[0]) + 1
        raise ModelError(f"lambda_{k} = {lam[bad[0]]!r} <= -1 for species {species}")
    logs = np.concatenate([[0.0], np.cumsum(np.log1p(lam))])
    with np.errstate(over="ignore"):
        return float(np.exp(logs.min())), float(np.exp(logs.max()))


# ---------------------------------------------------------------- model

Matrix = tuple[tuple[Node, ...], ...]


@dataclass(frozen=True)
class ModelSpec:
    ts: TimeScaleSpec
    n: int
    m: int
    b: tuple[Node, ...]
    r: tuple[Node, ...]
    a: Matrix
    c: Matrix
    d: Matrix
    e: Matrix
    tau: Matrix
    delta: Matrix
    xi: Matrix
    eta: Matrix
    impulses: ImpulseSchedule = ImpulseSchedule()
    t0: float = 0.0
    stats_override: dict | None = None
    name: str = ""
    document: dict = field(default_factory=dict, compare=False, repr=False)

    def coefficient(self, name: str):
        return getattr(self, name)

    @property
    def species(self) -> int:
        return self.n + self.m

    def growth(self) -> list[tuple[Node, float]]:
        """Per-species (rate expression, sign): b_i for prey, -r_j for predators."""
        return [(e, 1.0) for e in self.b] + [(e, -1.0) for e in self.r]

    def interaction(self) -> list[list[tuple[Node, float]]]:
        """Full (n+m)x(n+m) table of (coefficient, sign) in population form."""
        rows = []
        for i in range(self.n):
            rows.append([(x, -1.0) for x in self.a[i]] + [(x, -1.0) for x in self.c[i]])
        for j in range(self.m):
            rows.append([(x, 1.0) for x in self.d[j]] + [(x, -1.0) for x in self.e[j]])
        return rows

    def delays(self) -> list[list[Node]]:
        rows = [list(self.tau[i]) + list(self.delta[i]) for i in range(self.n)]
        rows += [list(self.xi[j]) + list(self.eta[j]) for j in range(self.m)]
        return rows

    def model_hash(self) -> str:
        blob = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def without_override(self) -> "ModelSpec":
        from dataclasses import replace
        return replace(self, stats_override=None)


_SHAPES = {
    "b": ("n",), "r": ("m",),
    "a": ("n", "n"), "c": ("n", "m"), "d": ("m", "n"), "e": ("m", "m"),
    "tau": ("n", "n"), "delta": ("n", "m"), "xi": ("m", "n"), "eta": ("m", "m"),
}


def _parse_entry(text: Any, where: str, variable: str = "t") -> Node:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ModelError(f"{where}: expected an expression string, got {text!r}")
    try:
        return parse_expr(text, variable)
    except ValueError as exc:
        raise ModelError(f"{where}: {exc}") from exc


ZERO = parse_expr("0")


def _parse_block(doc: dict, name: str, dims: dict[str, int]) -> tuple:
    shape = tuple(dims[s] for s in _SHAPES[name])
    if name not in doc:
        if name in DELAYS:
            return tuple(tuple(ZERO for _ in range(shape[1])) for _ in range(shape[0]))
        raise ModelError(f"missing field {name!r}")
    raw = doc[name]
    if len(shape) == 1:
        if not isinstance(raw, list) or len(raw) != shape[0]:
            raise ModelError(f"dimension mismatch: {name} must have {shape[0]} entries")
        return tuple(_parse_entry(x, f"{name}[{i}]") for i, x in enumerate(raw))
    if not isinstance(raw, list) or len(raw) != shape[0]:
        raise ModelError(f"dimension mismatch: {name} must have {shape[0]} rows")
    rows = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != shape[1]:
            raise ModelError(f"dimension mismatch: {name}[{i}] must have {shape[1]} entries")
        rows.append(tuple(_parse_entry(x, f"{name}[{i}][{j}]") for j, x in enumerate(row)))
    return tuple(rows)


def _parse_schedule(raw: dict | None, n: int, m: int, t0: float) -> ImpulseSchedule:
    if not raw:
        return ImpulseSchedule()
    times = raw.get("times")
    period = offset = None
    explicit = None
    if times:
        if "periodic" in times:
            p = times["periodic"]
            period = float(p["period"])
            offset = float(p.get("offset", 0.0))
            if not period > 0:
                raise ModelError("impulse period must be positive")
            if offset < 0:
                raise ModelError("impulse offset must be nonnegative")
        elif "explicit" in times:
            explicit = tuple(float(x) for x in times["explicit"])
            if any(b <= a for a, b in zip(explicit, explicit[1:])):
                raise ModelError("impulse times must be strictly increasing")
        else:
            raise ModelError("impulses.times needs 'periodic' or 'explicit'")
    lx = raw.get("lambda_x", [])
    ly = raw.get("lambda_y", [])
    if (period is not None or explicit) and (len(lx) != n or len(ly) != m):
        raise ModelError(f"dimension mismatch: lambda_x needs {n} and lambda_y {m} entries")
    return ImpulseSchedule(
        period=period, offset=offset or 0.0, explicit=explicit,
        lambda_x=tuple(_parse_entry(x, f"lambda_x[{i}]", "k") for i, x in enumerate(lx)),
        lambda_y=tuple(_parse_entry(x, f"lambda_y[{j}]", "k") for j, x in enumerate(ly)),
    )


def _check_override(ov: dict | None, dims: dict[str, int]) -> dict | None:
    if ov is None:
        return None
    if not isinstance(ov, dict):
        raise ModelError("stats_override must be an object")
    for key, val in ov.items():
        if key in ("sup", "inf"):
            for name, arr in val.items():
                if name not in COEFFS:
                    raise ModelError(f"stats_override.{key}: unknown coefficient {name!r}")
                shape = tuple(dims[s] for s in _SHAPES[name])
                if np.shape(arr) != shape:
                    raise ModelError(f"stats_override.{key}.{name} must have shape {shape}")
        elif key not in SCALAR_OVERRIDES:
            raise ModelError(f"stats_override: unknown field {key!r}")
    return ov


def _validate_nonnegative(model: ModelSpec, span: float = 100.0) -> None:
    if model.ts.is_lattice:
        grid = model.ts.points(model.ts.step * math.ceil(model.t0 / model.ts.step - 1e-9),
                               model.ts.step * math.floor((model.t0 + span) / model.ts.step))
    else:
        grid = np.linspace(model.t0, model.t0 + span, int(span * 20) + 1)
    for name in COEFFS + DELAYS:
        block = getattr(model, name)
        entries = block if name in ("b", "r") else [x for row in block for x in row]
        for idx, node in enumerate(entries):
            vals = evaluate(node, grid)
            if np.any(vals < 0):
                t = float(grid[np.argmax(vals < 0)])
                raise ModelError(f"{name} entry {idx} = {render(node)} is negative at t={t}")


def load_model(document: str | dict) -> ModelSpec:
    """Build and validate a ModelSpec from a JSON string or an already-parsed dict."""
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}") from exc
    else:
        doc = copy.deepcopy(document)
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    tsd = doc.get("time_scale")
    if not isinstance(tsd, dict) or "kind" not in tsd:
        raise ModelError("missing field 'time_scale' with a 'kind'")
    try:
        if tsd["kind"] == REALS:
            ts = TimeScaleSpec.reals()
        elif tsd["kind"] == LATTICE:
            ts = TimeScaleSpec.lattice(float(tsd.get("step", 1.0)))
        else:
            raise ModelError(f"unknown time scale kind {tsd['kind']!r}")
    except TimeScaleError as exc:
        raise ModelError(str(exc)) from exc
    try:
        n, m = int(doc["n"]), int(doc["m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError("fields 'n' and 'm' must be integers") from exc
    if n < 1 or m < 0:
        raise ModelError("need n >= 1 and m >= 0")
    dims = {"n": n, "m": m}
    t0 = float(doc.get("t0", 0.0))
    if ts.is_lattice:
        ts.check(t0)
    blocks = {name: _parse_block(doc, name, dims) for name in COEFFS + DELAYS}
    sched = _parse_schedule(doc.get("impulses"), n, m, t0)
    model = ModelSpec(
        ts=ts, n=n, m=m, impulses=sched, t0=t0,
        stats_override=_check_override(doc.get("stats_override"), dims),
        name=str(doc.get("name", "")), document=doc, **blocks,
    )
    _validate_nonnegative(model)
    for s in range(n + m):
        impulse_product_bound(sched, s, SamplingConfig().impulse_horizon)
    if ts.is_lattice and not sched.empty:
        for _, tk in sched.times_between(t0, t0 + 50 * max(sched.min_gap(), 1.0)):
            try:
                ts.check(tk)
            except TimeScaleError as exc:
                raise ModelError(f"impulse time {tk} is off the lattice") from exc
    return model


def load_model_file(path: str | Path) -> ModelSpec:
    return load_model(Path(path).read_text())


def bundled_path(name: str) -> Path:
    """Path of a model shipped in ``lvts/data`` (``example1`` -> ``example1.model.json``)."""
    if not name.endswith(".json"):
        name = f"{name}.model.json"
    return Path(str(resources.files("lvts") / "data" / name))


def bundled_model(name: str) -> ModelSpec:
    return load_model_file(bundled_path(name))


# ---------------------------------------------------------------- statistics

@dataclass
class CoeffStats:
    n: int
    m: int
    sup: dict[str, np.ndarray]          # f^U = sup |f|
    inf: dict[str, np.ndarray]          # f^L = inf |f|
    signed_min: dict[str, np.ndarray]   # inf f, for the nonnegativity check
    tau_plus: float = 0.0
    tau_minus: float = 0.0
    delta_plus: float = 0.0
    delta_minus: float = 0.0
    xi_plus: float = 0.0
    xi_minus: float = 0.0
    eta_plus: float = 0.0
    eta_minus: float = 0.0
    tau_delta: float = 0.0
    delta_delta: float = 0.0
    xi_delta: float = 0.0
    eta_delta: float = 0.0
    r: float = 1.0              # lower bound of the impulse products
    r_hi: float = 1.0           # upper bound of the impulse products
    mu_bar: float = 0.0
    lambda_min: float = 0.0
    lambda_max: float = 0.0
    overridden: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def from_constants(cls, b, r, a, c, d, e, *, mu_bar: float = 0.0, inf: dict | None = None,
                       **scalars) -> "CoeffStats":
        """Stats from given sup values; ``inf`` maps coefficient names to inf values (default: sup)."""
        n, m = len(b), len(r)
        shapes = {"b": (n,), "r": (m,), "a": (n, n), "c": (n, m), "d": (m, n), "e": (m, m)}
        sup = {k: np.asarray(v, dtype=float).reshape(shapes[k])
               for k, v in dict(b=b, r=r, a=a, c=c, d=d, e=e).items()}
        inf = inf or {}
        lo = {k: np.asarray(inf[k], dtype=float).reshape(shapes[k]) if k in inf else sup[k].copy()
              for k in sup}
        return cls(n=n, m=m, sup=sup, inf=lo, signed_min={k: v.copy() for k, v in lo.items()},
                   mu_bar=mu_bar, **scalars)

    def to_dict(self) -> dict:
        out = {"n": self.n, "m": self.m, "mu_bar": self.mu_bar,
               "sup": {k: v.tolist() for k, v in self.sup.items()},
               "inf": {k: v.tolist() for k, v in self.inf.items()}}
        for key in SCALAR_OVERRIDES:
            out[key] = getattr(self, key)
        out["lambda_min"] = self.lambda_min
        out["lambda_max"] = self.lambda_max
        out["overridden"] = self.overridden
        return out


def _block_extremes(block, ts, cfg, t0):
    arr = np.asarray(block, dtype=object)
    shape = arr.shape
    sup, inf, smin = np.empty(shape), np.empty(shape), np.empty(shape)
    for idx in np.ndindex(shape):
        ex = extremes(arr[idx], ts, cfg, t0)
        sup[idx], inf[idx] = abs_extremes(ex)
        smin[idx] = ex.inf
    return sup, inf, smin


def _delay_stats(block, ts, cfg, t0) -> tuple[float, float, float]:
    entries = [x for row in block for x in row]
    if not entries:
        return 0.0, 0.0, 0.0
    exs = [extremes(x, ts, cfg, t0) for x in entries]
    return (max(e.sup for e in exs), min(e.inf for e in exs),
            max(derivative_sup(x, ts, cfg, t0) for x in entries))


def compute_stats(model: ModelSpec, cfg: SamplingConfig | None = None, use_override: bool = False) -> CoeffStats:
    cfg = cfg or SamplingConfig()
    n, m = model.n, model.m
    shapes = {"b": (n,), "r": (m,), "a": (n, n), "c": (n, m), "d": (m, n), "e": (m, m)}
    sup, inf, smin = {}, {}, {}
    for name in COEFFS:
        block = getattr(model, name)
        if name in ("b", "r"):
            block = [list(block)]
        s, i, mn = _block_extremes(block, model.ts, cfg, model.t0)
        # empty blocks lose their shape in np.asarray, so restore it explicitly
        s, i, mn = (v.reshape(shapes[name]) for v in (s, i, mn))
        sup[name], inf[name], smin[name] = s, i, mn
    stats = CoeffStats(n=model.n, m=model.m, sup=sup, inf=inf, signed_min=smin,
                       mu_bar=model.ts.graininess_sup)
    for name in DELAYS:
        plus, minus, dsup = _delay_stats(getattr(model, name), model.ts, cfg, model.t0)
        setattr(stats, f"{name}_plus", plus)
        setattr(stats, f"{name}_minus", minus)
        setattr(stats, f"{name}_delta", dsup)
    los, his = [], []
    K = cfg.impulse_horizon
    for s in range(model.species):
        lo, hi = impulse_product_bound(model.impulses, s, K)
        los.append(lo)
        his.append(hi)
    stats.r, stats.r_hi = min(los), max(his)
    nk = model.impulses.count(K)
    if nk:
        lam = np.concatenate([model.impulses.lambdas(s, np.arange(1, nk + 1)) for s in range(model.species)])
        stats.lambda_min, stats.lambda_max = float(lam.min()), float(lam.max())
    if use_override and model.stats_override:
        apply_override(stats, model.stats_override)
    return stats


def apply_override(stats: CoeffStats, override: dict) -> CoeffStats:
    """Pin fields of ``stats`` in place, recording computed and pinned values."""
    for key, val in override.items():
        if key in ("sup", "inf"):
            target = getattr(stats, key)
            for name, arr in val.items():
                arr = np.asarray(arr, dtype=float).reshape(target[name].shape)
                if not np.array_equal(arr, target[name]):
                    stats.overridden[f"{key}.{name}"] = {"computed": target[name].tolist(),
                                                         "pinned": arr.tolist()}
                target[name] = arr
        else:
            stats.overridden[key] = {"computed": getattr(stats, key), "pinned": float(val)}
            setattr(stats, key, float(val))
    return stats
