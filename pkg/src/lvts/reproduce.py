"""Published reference values for the two bundled examples and the comparison table."""
from __future__ import annotations

from dataclasses import dataclass, field

from .analysis import Analysis, analyze
from .model import bundled_model, compute_stats

BOUND_TOL = 0.01
GAMMA_TOL = 0.05

# Published values, rounded to three decimals in the source.  Bounds are
# log-populations; gamma_x / gamma_y are the prey / predator stability margins.
PUBLISHED = {
    1: {
        "model": "example1",
        # example 1, permanence bounds
        "x_up": (1.591, 1.645), "y_up": (1.653, 1.324),
        "x_lo": (0.979, 0.896), "y_lo": (0.296, 0.198),
        # example 1, stability margins and their minimum
        "gamma_x": (2.408, 0.466), "gamma_y": (0.502, 0.418), "gamma": 0.418,
    },
    2: {
        "model": "example2",
        # example 2, permanence bounds (lower bounds exceed upper ones as published)
        "x_up": (0.041, 0.034), "y_up": (0.012, 0.038),
        "x_lo": (1.374, 1.360), "y_lo": (2.724, 2.747),
        # example 2, stability margins and their minimum
        "gamma_x": (0.239, 0.244), "gamma_y": (1.248, 1.093), "gamma": 0.239,
    },
}


@dataclass(frozen=True)
class Row:
    quantity: str
    published: float
    computed: float
    tol: float

    @property
    def delta(self) -> float:
        return abs(self.computed - self.published)

    @property
    def ok(self) -> bool:
        return self.delta <= self.tol

    def to_dict(self) -> dict:
        return {"quantity": self.quantity, "published": self.published, "computed": self.computed,
                "delta": self.delta, "tol": self.tol, "ok": self.ok}


@dataclass
class Reproduction:
    example: int
    rows: list[Row]
    analysis: Analysis
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_dict(self) -> dict:
        return {"example": self.example, "ok": self.ok, "rows": [r.to_dict() for r in self.rows],
                "warnings": self.warnings}


def reproduce(example: int) -> Reproduction:
    if example not in PUBLISHED:
        raise ValueError(f"unknown example {example!r}; choose from {sorted(PUBLISHED)}")
    ref = PUBLISHED[example]
    model = bundled_model(ref["model"])
    stats = compute_stats(model, use_override=True)
    res = analyze(stats, model)
    if res.bounds is None or res.certificate is None:
        raise RuntimeError(f"example {example}: {res.error}")
    rows = []
    for key in ("x_up", "y_up", "x_lo", "y_lo"):
        for i, (pub, val) in enumerate(zip(ref[key], getattr(res.bounds, key))):
            rows.append(Row(f"{key}[{i + 1}]", pub, float(val), BOUND_TOL))
    for key in ("gamma_x", "gamma_y"):
        for i, (pub, val) in enumerate(zip(ref[key], getattr(res.certificate, key))):
            rows.append(Row(f"{key}[{i + 1}]", pub, float(val), GAMMA_TOL))
    rows.append(Row("gamma", ref["gamma"], res.certificate.gamma, GAMMA_TOL))
    warnings = [f"consistency: {note}" for note in res.bounds.ordering_notes()]
    warnings += [f"override {k}: computed {v['computed']} -> pinned {v['pinned']}"
                 for k, v in stats.overridden.items()]
    return Reproduction(example, rows, res, warnings)
