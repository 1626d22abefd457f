"""Closed-form asymptotic bounds for scalar delayed logistic-type inequalities.

For a positive x with impulses x(t_k+) ~ d_k x(t_k) and products of the d_k
kept in [alpha, beta]:

* ``lemma31_M`` bounds limsup x when x' <= x^sigma (b - a x(t - tau)) + d,
* ``lemma31_m`` bounds liminf x when x' >= x (b - a x(t - tau)) + d and
  limsup x <= N,
* ``lemma32_M`` / ``lemma32_m`` are the variants with the sigma moved to the
  other side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

# below this graininess the log(1 -+ a N mu)/mu factors are replaced by their limit
MU_EPS = 1e-12


class HypothesisViolation(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonParams:
    a: float
    b: float
    d: float = 0.0
    tau_bar: float = 0.0
    mu_bar: float = 0.0
    alpha: float = 1.0
    beta: float = 1.0
    N: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not 0 < self.alpha <= self.beta:
            raise ValueError(f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}")
        if self.d < 0 or self.tau_bar < 0 or self.mu_bar < 0:
            raise ValueError("d, tau_bar and mu_bar must be nonnegative")

    def with_(self, **kw) -> "ComparisonParams":
        return replace(self, **kw)


def xbar(a: float, b: float, d: float) -> float:
    """Unique positive root of x (a x - b) - d = 0."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if d < 0:
        raise ValueError(f"d must be nonnegative, got {d}")
    if b <= 0 and d == 0:
        raise ValueError("x(ax - b) = 0 has no positive root when b <= 0 and d = 0")
    disc = math.sqrt(b * b + 4 * a * d)
    if b >= 0:
        return (b + disc) / (2 * a)
    # cancellation-free form of the same root for negative b
    return 2 * d / (disc - b)


def log_factor(rate: float, mu_bar: float, sign: float = -1.0) -> float:
    """log(1 + sign*rate*mu)/mu with its mu -> 0 limit sign*rate."""
    if mu_bar < MU_EPS:
        return sign * rate
    arg = 1.0 + sign * rate * mu_bar
    if arg <= 0:
        raise HypothesisViolation(f"1 {'+' if sign > 0 else '-'} {rate}*{mu_bar} <= 0")
    return math.log1p(sign * rate * mu_bar) / mu_bar


def lemma31_M(p: ComparisonParams) -> float:
    if not p.b > 0:
        raise ValueError("lemma31_M needs b > 0")
    den = 1.0 - p.b * p.mu_bar
    if den <= 0:
        raise HypothesisViolation(f"1 - b*mu_bar = {den} <= 0")
    growth = math.exp(p.b * p.tau_bar / den)
    if p.d == 0:
        return p.b * p.beta / p.a * growth
    k = p.d * p.beta / p.b
    return -k + (k + xbar(p.a, p.b, p.d) * p.beta) * growth


def lemma31_m(p: ComparisonParams) -> float:
    if not p.b > 0:
        raise ValueError("lemma31_m needs b > 0")
    if p.mu_bar >= MU_EPS and 1.0 - p.a * p.N * p.mu_bar <= 0:
        raise HypothesisViolation(f"1 - a*N*mu_bar = {1.0 - p.a * p.N * p.mu_bar} <= 0")
    return p.b * p.alpha ** 2 / p.a * math.exp(log_factor(p.a * p.N, p.mu_bar, -1.0) * p.tau_bar)


def lemma32_M(p: ComparisonParams) -> float:
    if p.b < 0:
        raise ValueError("lemma32_M needs b >= 0")
    growth = math.exp(p.b * p.tau_bar)
    if p.d == 0:
        return p.b * p.beta / p.a * growth
    if p.b == 0:
        raise ValueError("lemma32_M with d > 0 needs b > 0")
    k = p.d * p.beta / p.b
    return -k + (k + xbar(p.a, p.b, p.d) * p.beta) * growth


def lemma32_m(p: ComparisonParams) -> float:
    if p.b < 0:
        raise ValueError("lemma32_m needs b >= 0")
    return p.b * p.alpha ** 2 / p.a * math.exp(-log_factor(p.a * p.N, p.mu_bar, 1.0) * p.tau_bar)
