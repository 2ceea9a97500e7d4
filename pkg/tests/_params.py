"""Seeded parameter sets shared by the property and acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sfrnadir.ffr import StepFfr
from sfrnadir.model import CRITICAL_GUARD_BAND, AggregateSfr, Disturbance, characteristics
from sfrnadir.errors import RegimeError

# sampling box, uniform in every coordinate
RANGES = {
    "h_sigma": (2.0, 8.0),
    "d_sigma": (0.5, 40.0),
    "r_g": (0.03, 0.1),
    "t_1": (0.0, 1.0),
    "t_g": (2.0, 15.0),
    "delta_p_d": (-0.3, -0.01),
    "p_sus": (0.0, 0.1),
    "ffr_t_1": (0.02, 0.1),
    "ffr_t_2": (0.2, 0.6),
}

SEED = 20240611


@dataclass(frozen=True)
class Case:
    agg: AggregateSfr
    step: StepFfr
    dist: Disturbance

    def params(self) -> dict:
        return {
            "h_sigma": self.agg.h_sigma,
            "d_sigma": self.agg.d_sigma,
            "r_g": self.agg.r_g,
            "t_1": self.agg.t_1,
            "t_g": self.agg.t_g,
            "delta_p_d": self.dist.delta_p_d,
            "p_sus": self.step.p_sus,
            "ffr_t_1": self.step.t_1,
            "ffr_t_2": self.step.t_2,
        }


def _draw(rng) -> dict:
    return {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in RANGES.items()}


def sample_cases(n: int, seed: int = SEED) -> tuple[list[Case], int]:
    """``n`` underdamped cases and the number of rejected (near-)overdamped draws."""
    rng = np.random.default_rng(seed)
    cases, rejected = [], 0
    while len(cases) < n:
        p = _draw(rng)
        agg = AggregateSfr(p["h_sigma"], p["d_sigma"], p["r_g"], p["t_1"], p["t_g"])
        try:
            zeta = characteristics(agg).zeta
        except RegimeError:
            rejected += 1
            continue
        if 1.0 - zeta < CRITICAL_GUARD_BAND:
            rejected += 1
            continue
        cases.append(Case(agg, StepFfr(p["p_sus"], p["ffr_t_1"], p["ffr_t_2"]), Disturbance(p["delta_p_d"])))
    return cases, rejected


def reference_case() -> Case:
    """Hand-checkable system: H=4 s, D=1, R=0.05, T1=0.3 s, Tg=10 s."""
    return Case(AggregateSfr(4.0, 1.0, 0.05, 0.3, 10.0), StepFfr(0.04, 0.05, 0.35), Disturbance(-0.1))
