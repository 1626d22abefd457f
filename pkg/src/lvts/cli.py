"""Permanence bounds, stability certificates and simulation for impulsive delayed Lotka-Volterra models.

Exit codes: 0 verified, 2 hypothesis or verification failure, 1 operational error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import Analysis, analyze
from .model import ModelError, ModelSpec, SamplingConfig, bundled_model, compute_stats, load_model_file
from .reproduce import PUBLISHED, reproduce
from .sim import SimConfig, empirical_bounds, simulate, stability_gap

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
GAP_RATIO = 0.01
INIT_GAP = 0.5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def resolve_model(path: str) -> ModelSpec:
    """A model file path, or the name of a bundled example (``example1`` or ``example1.model.json``)."""
    p = Path(path)
    if p.exists():
        return load_model_file(p)
    name = p.name.removesuffix(".json").removesuffix(".model")
    try:
        return bundled_model(name)
    except FileNotFoundError:
        raise FileNotFoundError(f"model file not found: {path}") from None


def _num(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return _num(obj)


def _sampling(args) -> SamplingConfig:
    return SamplingConfig(window=args.sample_window) if args.sample_window else SamplingConfig()


def _parse_init(text: str | None):
    if text is None:
        return None
    out = []
    for item in text.split(","):
        item = item.strip()
        try:
            out.append(float(item))
        except ValueError:
            out.append(item)
    return out


def _warnings(res: Analysis) -> list[str]:
    out = [f"override {k}: computed {v['computed']} -> pinned {v['pinned']}"
           for k, v in res.stats.overridden.items()]
    out += [f"consistency: {n}" for n in res.consistency()["notes"]]
    out += [f"{k} fails: {'; '.join(v.witnesses)}" for k, v in res.hypotheses.results.items()
            if v.status == "fail"]
    if res.error:
        out.append(res.error)
    return out


def _analysis(model: ModelSpec, args) -> Analysis:
    stats = compute_stats(model, _sampling(args), use_override=args.use_override)
    return analyze(stats, model)


def build_report(command: str, model: ModelSpec, res: Analysis) -> dict:
    return {
        "command": command,
        "model": model.name,
        "model_hash": model.model_hash(),
        "stats": res.stats.to_dict(),
        **res.to_dict(),
        "verdict": res.verdict,
        "warnings": _warnings(res),
    }


def _fmt(x) -> str:
    return repr(x) if not isinstance(x, list) else "[" + ", ".join(_fmt(v) for v in x) + "]"


def _print_human(report: dict) -> None:
    print(f"model {report['model'] or '?'} ({report['model_hash']})")
    for key, h in report["hypotheses"].items():
        margins = ", ".join(f"{k}={_fmt(v)}" for k, v in h["margins"].items())
        print(f"  {key}: {h['status']}" + (f"  [{margins}]" if margins else ""))
    if report["bounds"]:
        for key, vals in report["bounds"].items():
            print(f"  {key} = {_fmt(vals)}")
    if report["gamma"]:
        g = report["gamma"]
        print(f"  gamma_x = {_fmt(g['gamma_x'])}")
        print(f"  gamma_y = {_fmt(g['gamma_y'])}")
        print(f"  gamma = {_fmt(g['gamma'])}  (-gamma regressive: {g['neg_gamma_regressive']})")
    print(f"  bounds ordered: {report['consistency']['ordering_ok']}")
    if "empirical" in report:
        emp = report["empirical"]
        for row in emp["species"]:
            print(f"  {row['species']}: tail [{_fmt(row['lo'])}, {_fmt(row['hi'])}] "
                  f"target [{_fmt(row['target_lo'])}, {_fmt(row['target_hi'])}] {row['status']}")
        gap = emp["gap"]
        print(f"  gap ratio g(end)/g(0) = {_fmt(gap['ratio'])}, decay rate = {_fmt(gap['decay_rate'])}")
    for w in report["warnings"]:
        print(f"warning: {w}")
    print(f"verdict: {'true' if report['verdict'] else 'false'}")


def _emit(report: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(_clean(report), indent=2))
    else:
        _print_human(_clean(report))


def cmd_check(args) -> int:
    model = resolve_model(args.model)
    res = _analysis(model, args)
    report = build_report("check", model, res)
    _emit(report, args.json)
    return EXIT_OK if res.verdict else EXIT_FAIL


def _sim_config(args, model: ModelSpec, horizon_default: float) -> SimConfig:
    return SimConfig(step=args.step, horizon=args.horizon or horizon_default,
                     initial_history=_parse_init(args.init), seed=args.seed)


def _species_names(model: ModelSpec) -> list[str]:
    return [f"z{i + 1}" for i in range(model.n)] + [f"w{j + 1}" for j in range(model.m)]


def cmd_simulate(args) -> int:
    model = resolve_model(args.model)
    cfg = _sim_config(args, model, 100.0)
    traj = simulate(model, cfg)
    if args.out:
        traj.to_csv(args.out)
    lo, hi = empirical_bounds(traj, cfg.transient_fraction)
    summary = {
        "model": model.name, "model_hash": model.model_hash(), "config": traj.config,
        "rows": len(traj), "impulses": int(traj.impulse.sum()), "out": args.out,
        "tail": [{"species": s, "lo": float(a), "hi": float(b)} for s, a, b in zip(_species_names(model), lo, hi)],
        "warnings": list(traj.warnings),
    }
    if args.json:
        print(json.dumps(_clean(summary), indent=2))
    else:
        print(f"simulated {model.name or '?'}: {summary['rows']} rows, {summary['impulses']} impulses"
              + (f", written to {args.out}" if args.out else ""))
        for row in summary["tail"]:
            print(f"  ln {row['species']} over tail: [{row['lo']!r}, {row['hi']!r}]")
        for w in summary["warnings"]:
            print(f"warning: {w}")
    return EXIT_OK


def cmd_verify(args) -> int:
    model = resolve_model(args.model)
    res = _analysis(model, args)
    report = build_report("verify", model, res)
    cfg = _sim_config(args, model, 200.0)
    init_a = cfg.initial_history
    if init_a is None:
        init_a = ([1.0] * model.species if cfg.seed is None
                  else list(np.random.default_rng(cfg.seed).uniform(0.5, 2.0, model.species)))
    if any(isinstance(v, str) for v in init_a):
        init_b = [f"({v})*exp({INIT_GAP})" if isinstance(v, str) else v * math.exp(INIT_GAP) for v in init_a]
    else:
        init_b = [v * math.exp(INIT_GAP) for v in init_a]
    gap = stability_gap(model, cfg, init_a, init_b)
    lo, hi = empirical_bounds(gap.traj_a, cfg.transient_fraction)
    species = []
    ok = True
    if res.bounds is not None:
        b = res.bounds
        tlo = np.concatenate([b.x_lo, b.y_lo]) - args.eps
        thi = np.concatenate([b.x_up, b.y_up]) + args.eps
        for name, a_, b_, l_, h_ in zip(_species_names(model), lo, hi, tlo, thi):
            if l_ > h_:
                status = "skipped (inverted bounds)"
                report["warnings"].append(f"{name}: empirical check skipped, lower bound exceeds upper bound")
            else:
                status = "inside" if l_ <= a_ and b_ <= h_ else "outside"
                ok &= status == "inside"
            species.append({"species": name, "lo": a_, "hi": b_, "target_lo": l_, "target_hi": h_,
                            "status": status})
    else:
        ok = False
    gap_ok = gap.ratio < GAP_RATIO
    report["warnings"] += list(gap.traj_a.warnings)
    report["empirical"] = {"eps": args.eps, "config": gap.traj_a.config, "species": species,
                           "gap": {**gap.to_dict(), "threshold": GAP_RATIO, "ok": gap_ok},
                           "permanence_ok": ok}
    checked = any(s["status"] != "skipped (inverted bounds)" for s in species)
    report["verdict"] = bool(res.hypotheses.ok and ok and checked and gap_ok)
    _emit(report, args.json)
    return EXIT_OK if report["verdict"] else EXIT_FAIL


def cmd_reproduce(args) -> int:
    rep = reproduce(args.example)
    if args.json:
        print(json.dumps(_clean(rep.to_dict()), indent=2))
    else:
        print(f"{'quantity':<12} {'published':>10} {'computed':>12} {'|delta|':>10}  ok")
        for r in rep.rows:
            print(f"{r.quantity:<12} {r.published:>10.3f} {r.computed:>12.6f} {r.delta:>10.6f}  {'yes' if r.ok else 'NO'}")
        for w in rep.warnings:
            print(f"warning: {w}")
    return EXIT_OK if rep.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lvts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p, sim: bool, analysis: bool, horizon: float = 100.0):
        p.add_argument("model", help="model file, or a bundled example name (example1, example1_h2, example2)")
        p.add_argument("--json", action="store_true", help="emit JSON instead of text")
        if analysis:
            p.add_argument("--use-override", action="store_true",
                           help="pin coefficient statistics from the model's stats_override block")
            p.add_argument("--sample-window", type=float, default=None,
                           help="time window sampled for coefficient extrema (default 2000)")
        if sim:
            p.add_argument("--horizon", type=float, default=None, help=f"simulated time span (default {horizon:g})")
            p.add_argument("--step", type=float, default=None, help="integration step on the reals (default 0.01)")
            p.add_argument("--seed", type=int, default=None, help="seed for random constant initial histories")
            p.add_argument("--init", default=None,
                           help="comma-separated initial history per species: constants or expressions in t")

    model_args(sub.add_parser("check", help="hypotheses, permanence bounds and stability certificate"),
               sim=False, analysis=True)
    p = sub.add_parser("simulate", help="simulate a trajectory and print tail log-state ranges")
    model_args(p, sim=True, analysis=False)
    p.add_argument("--out", default=None, help="write the trajectory CSV here")
    p = sub.add_parser("verify", help="check plus simulated permanence and stability")
    model_args(p, sim=True, analysis=True, horizon=200.0)
    p.add_argument("--eps", type=float, default=0.05, help="slack around the bounds (default 0.05)")
    p = sub.add_parser("reproduce", help="compare the bundled examples with their published values")
    p.add_argument("example", type=int, choices=sorted(PUBLISHED))
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    return parser


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "verify": cmd_verify, "reproduce": cmd_reproduce}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (OSError, ModelError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
