"""Permanence bounds, hypothesis checks and the stability certificate.

All bounds are in log-population units: species i of the prey block stays
eventually in [x_lo[i], x_up[i]], predators in [y_lo[j], y_up[j]].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comparison import MU_EPS, HypothesisViolation, log_factor
from .model import CoeffStats, ModelSpec, SamplingConfig, impulse_product_bound
from .timescale import TimeScaleSpec, constant, is_positively_regressive

PASS, FAIL, ASSUMED, OVERRIDDEN = "pass", "fail", "assumed", "overridden"

# relative decrease of the impulse product lower bound tolerated between K/2 and K impulses
R_DRIFT_TOL = 1e-6


class BoundsError(ValueError):
    """A logarithm or denominator in the bound formulas went nonpositive."""

    def __init__(self, message: str, species: str, bracket: str):
        super().__init__(message)
        self.species = species
        self.bracket = bracket


def sig6(x: float) -> float:
    return float(f"{x:.6g}") if math.isfinite(x) else x


@dataclass
class PermanenceBounds:
    x_up: np.ndarray
    y_up: np.ndarray
    x_lo: np.ndarray
    y_lo: np.ndarray
    # intermediate quantities reused by the H4 check
    terms: dict = field(default_factory=dict, repr=False)

    @property
    def ordering_ok(self) -> bool:
        return bool(np.all(self.x_lo <= self.x_up) and np.all(self.y_lo <= self.y_up))

    def ordering_notes(self) -> list[str]:
        notes = []
        for i in np.flatnonzero(self.x_lo > self.x_up):
            notes.append(f"x_lo[{i}]={self.x_lo[i]:.6g} > x_up[{i}]={self.x_up[i]:.6g}")
        for j in np.flatnonzero(self.y_lo > self.y_up):
            notes.append(f"y_lo[{j}]={self.y_lo[j]:.6g} > y_up[{j}]={self.y_up[j]:.6g}")
        return notes

    def to_dict(self) -> dict:
        return {"x_up": self.x_up.tolist(), "y_up": self.y_up.tolist(),
                "x_lo": self.x_lo.tolist(), "y_lo": self.y_lo.tolist()}


def _ln(value: float, species: str, bracket: str) -> float:
    if not value > 0 or not math.isfinite(value):
        raise BoundsError(f"{bracket} for {species} is {value!r}, logarithm undefined", species, bracket)
    return math.log(value)


def permanence_bounds(stats: CoeffStats) -> PermanenceBounds:
    """Upper bounds first, then lower bounds, each layer feeding the next."""
    n, m, mu = stats.n, stats.m, stats.mu_bar
    bU, bL, rU = stats.sup["b"], stats.inf["b"], stats.sup["r"]
    aU, aL, cU = stats.sup["a"], stats.inf["a"], stats.sup["c"]
    dU, dL = stats.sup["d"], stats.inf["d"]
    eU, eL = stats.sup["e"], stats.inf["e"]
    r2 = stats.r ** 2

    x_up = np.empty(n)
    grow_x = np.empty(n)
    for i in range(n):
        den = 1.0 - bU[i] * mu
        if den <= 0:
            raise BoundsError(f"1 - b_{i}^U*mu_bar = {den} <= 0", f"x{i + 1}", "1 - b^U mu")
        grow_x[i] = bU[i] * math.exp(bU[i] * stats.tau_plus / den)
        x_up[i] = _ln(grow_x[i] / aL[i, i], f"x{i + 1}", "upper bound argument")
    X = np.exp(x_up)

    y_up = np.empty(m)
    S = dU @ X if m else np.empty(0)
    grow_y = np.empty(m)
    for j in range(m):
        if not S[j] > 0:
            raise BoundsError(f"sum_l d_{j}l^U e^x_l = {S[j]} is not positive", f"y{j + 1}", "predator intake")
        den = 1.0 / S[j] - mu
        if den <= 0:
            raise BoundsError(f"1/S - mu_bar = {den} <= 0", f"y{j + 1}", "1/S - mu")
        grow_y[j] = S[j] * math.exp(stats.eta_plus / den)
        y_up[j] = _ln(grow_y[j] / eL[j, j], f"y{j + 1}", "upper bound argument")
    Y = np.exp(y_up)

    x_lo = np.empty(n)
    inner_x = np.empty(n)
    lhs_x = np.empty(n)
    for i in range(n):
        others = sum(aU[i, l] * X[l] for l in range(n) if l != i)
        inner_x[i] = bL[i] - others - float(cU[i] @ Y) if m else bL[i] - others
        try:
            lf = log_factor(aU[i, i] * X[i], mu, -1.0)
        except HypothesisViolation as exc:
            raise BoundsError(str(exc), f"x{i + 1}", "1 - a_ii^U e^x mu") from exc
        lhs_x[i] = r2 * inner_x[i] * math.exp(lf * stats.tau_plus)
        x_lo[i] = _ln(lhs_x[i] / aU[i, i], f"x{i + 1}", "lower bound bracket")
    XL = np.exp(x_lo)

    y_lo = np.empty(m)
    inner_y = np.empty(m)
    lhs_y = np.empty(m)
    for j in range(m):
        others = sum(eU[j, h] * Y[h] for h in range(m) if h != j)
        inner_y[j] = float(dL[j] @ XL) - rU[j] - others
        try:
            lf = log_factor(eU[j, j] * Y[j], mu, -1.0)
        except HypothesisViolation as exc:
            raise BoundsError(str(exc), f"y{j + 1}", "1 - e_jj^U e^y mu") from exc
        lhs_y[j] = r2 * inner_y[j] * math.exp(lf * stats.eta_plus)
        y_lo[j] = _ln(lhs_y[j] / eU[j, j], f"y{j + 1}", "lower bound bracket")

    terms = {"grow_x": grow_x, "S": S, "grow_y": grow_y, "inner_x": inner_x, "inner_y": inner_y,
             "lhs_x": lhs_x, "lhs_y": lhs_y}
    return PermanenceBounds(x_up, y_up, x_lo, y_lo, terms)


def delay_free_bounds(stats: CoeffStats) -> PermanenceBounds:
    """Bounds with all delays, graininess and impulses switched off (exp factors are 1)."""
    n, m = stats.n, stats.m
    bU, bL, rU = stats.sup["b"], stats.inf["b"], stats.sup["r"]
    aU, aL, cU = stats.sup["a"], stats.inf["a"], stats.sup["c"]
    dU, dL, eU, eL = stats.sup["d"], stats.inf["d"], stats.sup["e"], stats.inf["e"]
    X = bU / np.diag(aL)
    S = dU @ X if m else np.empty(0)
    Y = S / np.diag(eL) if m else np.empty(0)
    offd_a = aU - np.diag(np.diag(aU))
    XL = (bL - offd_a @ X - (cU @ Y if m else 0.0)) / np.diag(aU)
    offd_e = eU - np.diag(np.diag(eU)) if m else eU
    YL = (dL @ XL - rU - offd_e @ Y) / np.diag(eU) if m else np.empty(0)
    return PermanenceBounds(np.log(X), np.log(Y), np.log(XL), np.log(YL))


# ---------------------------------------------------------------- certificate

@dataclass
class StabilityCertificate:
    gamma_x: np.ndarray
    gamma_y: np.ndarray
    gamma: float
    neg_gamma_regressive: bool
    verdict: bool

    def to_dict(self) -> dict:
        return {"gamma_x": self.gamma_x.tolist(), "gamma_y": self.gamma_y.tolist(),
                "gamma": self.gamma, "neg_gamma_regressive": self.neg_gamma_regressive,
                "verdict": self.verdict}


class StabilityError(ValueError):
    pass


def stability_certificate(stats: CoeffStats, bounds: PermanenceBounds) -> StabilityCertificate:
    mu = stats.mu_bar
    for name in ("tau", "delta", "xi", "eta"):
        if not 1.0 - getattr(stats, f"{name}_delta") > 0:
            raise StabilityError(f"1 - {name}^Delta = {1.0 - getattr(stats, f'{name}_delta')} <= 0")
    aU, aL, cU = stats.sup["a"], stats.inf["a"], stats.sup["c"]
    dU, eU, eL = stats.sup["d"], stats.sup["e"], stats.inf["e"]
    tp, tm = stats.tau_plus, stats.tau_minus
    dp, dm = stats.delta_plus, stats.delta_minus
    xp, xm = stats.xi_plus, stats.xi_minus
    ep, em = stats.eta_plus, stats.eta_minus
    inv_tau = 1.0 / (1.0 - stats.tau_delta)
    inv_delta = 1.0 / (1.0 - stats.delta_delta)
    inv_xi = 1.0 / (1.0 - stats.xi_delta)
    inv_eta = 1.0 / (1.0 - stats.eta_delta)

    X, Y = np.exp(bounds.x_up), np.exp(bounds.y_up)
    XL, YL = np.exp(bounds.x_lo), np.exp(bounds.y_lo)
    A = aU.sum(axis=0) * X                  # sum_l a_li^U e^{x_i^up}
    E = eU.sum(axis=0) * Y                  # sum_h e_hj^U e^{y_j^up}
    CY = cU @ Y                             # sum_j c_ij^U e^{y_j^up}, per prey i
    DX = dU * X                             # d_ji^U e^{x_i^up}
    CYm = cU * Y                            # c_ij^U e^{y_j^up}
    fa, fe = 2 * mu * A + 1, 2 * mu * E + 1

    gx = (aL.sum(axis=0) * XL - 2 * mu * A ** 2
          - inv_tau * fa * A ** 2 * (2 * tp - tm)
          - inv_xi * fa * CY * DX.sum() * (xp + dp - xm)
          - (DX * fe[:, None]).sum(axis=0)
          - inv_xi * (DX * (fe * E)[:, None]).sum(axis=0) * (ep + xp - xm)
          - inv_tau * (DX * fe[:, None]).sum(axis=0) * A * (tp + xp - tm))
    gy = (eL.sum(axis=0) * YL - 2 * mu * E ** 2
          - inv_eta * fe * E ** 2 * (2 * ep - em)
          - inv_delta * fe * DX.sum(axis=1) * CYm.sum() * (dp + ep - em)
          - (CYm * fa[:, None]).sum(axis=0)
          - inv_delta * (CYm * (fa * A)[:, None]).sum(axis=0) * (tp + dp - dm)
          - inv_eta * (CYm * fa[:, None]).sum(axis=0) * E * (ep + dp - em))
    gamma = float(min(np.concatenate([gx, gy])))
    reg = 1.0 - mu * gamma > 0
    return StabilityCertificate(gx, gy, gamma, bool(reg), bool(gamma > 0 and reg))


# ---------------------------------------------------------------- hypotheses

@dataclass
class HypothesisResult:
    status: str
    margins: dict[str, float] = field(default_factory=dict)
    witnesses: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"status": self.status, "margins": {k: sig6(v) for k, v in self.margins.items()},
                "witnesses": self.witnesses, "notes": self.notes}


@dataclass
class HypothesisReport:
    results: dict[str, HypothesisResult]

    def __getitem__(self, key: str) -> HypothesisResult:
        return self.results[key]

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.results.items() if v.status == FAIL]

    @property
    def ok(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {k: v.to_dict() for k, v in self.results.items()}


def _result(margins: dict[str, float], witnesses: list[str] | None = None,
            overridden: bool = False, notes: list[str] | None = None) -> HypothesisResult:
    witnesses = list(witnesses or [])
    witnesses += [f"{k} = {sig6(v)}" for k, v in margins.items() if not v > 0]
    status = FAIL if witnesses else (OVERRIDDEN if overridden else PASS)
    return HypothesisResult(status, margins, witnesses, list(notes or []))


def _regressive_margin(rate: float, mu: float) -> tuple[float, bool]:
    """Margin 1 - mu*rate of -rate in R+, and the kernel's verdict for the constant rate -rate."""
    ts = TimeScaleSpec.lattice(mu) if mu > MU_EPS else TimeScaleSpec.reals()
    ok = is_positively_regressive(ts, constant(-rate), (0.0, ts.graininess_sup), samples=1)
    return 1.0 - mu * rate, ok


def check_hypotheses(model: ModelSpec | None, stats: CoeffStats,
                     bounds: PermanenceBounds | None = None) -> HypothesisReport:
    ov = set(stats.overridden)
    any_ov = bool(ov)
    res: dict[str, HypothesisResult] = {}

    # H1: nonnegative coefficients and delays
    m1 = {f"min {k}": float(v.min()) if v.size else 0.0 for k, v in stats.signed_min.items()}
    for name in ("tau", "delta", "xi", "eta"):
        m1[f"{name}-"] = getattr(stats, f"{name}_minus")
    res["H1"] = HypothesisResult(PASS if all(v >= 0 for v in m1.values()) else FAIL, m1,
                                 [f"{k} = {sig6(v)} < 0" for k, v in m1.items() if v < 0])

    # H2: impulse sizes and product bounds; (margin, strict) pairs
    h2_ov = bool(ov & {"r", "r_hi"})
    checks = {"r": (stats.r, True), "1 - r_hi": (1.0 - stats.r_hi, False),
              "r_hi - r": (stats.r_hi - stats.r, False)}
    notes = []
    if h2_ov:
        notes.append("impulse product bounds pinned by stats override; lambda ranges not rechecked")
    else:
        checks["1 + lambda_min"] = (1.0 + stats.lambda_min, True)
        checks["-lambda_max"] = (-stats.lambda_max, False)
        if model is not None and not model.impulses.empty:
            # products still shrinking over the second half of the scan: r is not bounded below
            K = SamplingConfig().impulse_horizon
            drift = min(impulse_product_bound(model.impulses, s, K)[0]
                        / impulse_product_bound(model.impulses, s, K // 2)[0]
                        for s in range(model.species))
            checks["r settled"] = (drift - (1.0 - R_DRIFT_TOL), True)
    wit = [f"{k} = {sig6(v)}" for k, (v, strict) in checks.items() if (v <= 0 if strict else v < 0)]
    res["H2"] = HypothesisResult(FAIL if wit else (OVERRIDDEN if h2_ov else PASS),
                                 {k: v for k, (v, _) in checks.items()}, wit, notes)

    # H3: impulse instants separated
    if model is None or model.impulses.empty:
        res["H3"] = HypothesisResult(PASS, {}, [], ["no impulses"])
    else:
        theta = model.impulses.min_gap()
        notes = [] if model.impulses.period else ["uniform almost periodicity of explicit times is not checked"]
        res["H3"] = _result({"theta": theta}, notes=notes)

    # H4: regressivity and positive bound arguments
    mu = stats.mu_bar
    if bounds is None:
        try:
            bounds = permanence_bounds(stats)
        except BoundsError as exc:
            res["H4"] = HypothesisResult(FAIL, {}, [f"{exc.species}: {exc}"])
    if "H4" not in res:
        t = bounds.terms
        X, Y = np.exp(bounds.x_up), np.exp(bounds.y_up)
        m4, wit = {}, []
        rates = [(f"b_{i + 1}^U", stats.sup["b"][i]) for i in range(stats.n)]
        rates += [(f"S_{j + 1}", t["S"][j]) for j in range(stats.m)]
        rates += [(f"a_{i + 1}{i + 1}^U e^x", stats.sup["a"][i, i] * X[i]) for i in range(stats.n)]
        rates += [(f"e_{j + 1}{j + 1}^U e^y", stats.sup["e"][j, j] * Y[j]) for j in range(stats.m)]
        for label, rate in rates:
            margin, ok = _regressive_margin(rate, mu)
            m4[f"regressive -{label}"] = margin
            if not ok:
                wit.append(f"-{label} is not positively regressive")
        for i in range(stats.n):
            m4[f"x{i + 1} upper"] = t["grow_x"][i] - stats.inf["a"][i, i]
            m4[f"x{i + 1} lower"] = t["lhs_x"][i] - stats.sup["a"][i, i]
        for j in range(stats.m):
            m4[f"y{j + 1} upper"] = t["grow_y"][j] - stats.inf["e"][j, j]
            m4[f"y{j + 1} lower"] = t["lhs_y"][j] - stats.sup["e"][j, j]
        res["H4"] = _result(m4, wit, any_ov)

    res["H5"] = HypothesisResult(ASSUMED, {}, [], ["constrains the solution class, not the data"])

    m6 = {f"1 - {k}^Delta": 1.0 - getattr(stats, f"{k}_delta") for k in ("tau", "delta", "xi", "eta")}
    res["H6"] = _result(m6, overridden=bool(ov & {"tau_delta", "delta_delta", "xi_delta", "eta_delta"}))

    if res["H4"].status == FAIL and bounds is None:
        res["H7"] = HypothesisResult(FAIL, {}, ["bounds unavailable"])
    elif res["H6"].status == FAIL:
        res["H7"] = HypothesisResult(FAIL, {}, ["H6 fails, gamma undefined"])
    else:
        cert = stability_certificate(stats, bounds)
        res["H7"] = _result({"gamma": cert.gamma, "1 - mu*gamma": 1.0 - mu * cert.gamma}, overridden=any_ov)
    return HypothesisReport(res)


# ---------------------------------------------------------------- report

@dataclass
class Analysis:
    stats: CoeffStats
    bounds: PermanenceBounds | None
    hypotheses: HypothesisReport
    certificate: StabilityCertificate | None
    error: str | None = None

    @property
    def verdict(self) -> bool:
        return bool(self.certificate and self.certificate.verdict and self.hypotheses.ok)

    def consistency(self) -> dict:
        if self.bounds is None:
            return {"ordering_ok": False, "notes": ["bounds unavailable"]}
        return {"ordering_ok": self.bounds.ordering_ok, "notes": self.bounds.ordering_notes()}

    def to_dict(self) -> dict:
        return {
            "hypotheses": self.hypotheses.to_dict(),
            "bounds": self.bounds.to_dict() if self.bounds else None,
            "gamma": self.certificate.to_dict() if self.certificate else None,
            "consistency": self.consistency(),
        }


def analyze(stats: CoeffStats, model: ModelSpec | None = None) -> Analysis:
    """stats -> bounds -> hypotheses -> certificate, never raising on hypothesis failures."""
    error = None
    bounds = cert = None
    try:
        bounds = permanence_bounds(stats)
    except BoundsError as exc:
        error = str(exc)
    hyp = check_hypotheses(model, stats, bounds)
    if bounds is not None:
        try:
            cert = stability_certificate(stats, bounds)
        except StabilityError as exc:
            error = str(exc)
    return Analysis(stats, bounds, hyp, cert, error)
