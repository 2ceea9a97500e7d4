"""Fast frequency response (FFR) signal models.

Three FFR types are supported:

* step response: a delayed ramp up to a sustained power ``p_sus``, written as
  the difference of two delayed ramps so that its Laplace image is
  ``p_sus (e^{-t1 s} - e^{-t2 s}) / ((t2 - t1) s^2)``;
* proportional response (P/f droop), ``-delta_f / r_ibr``;
* derivative response (synthetic inertia), ``-2 h_ibr d(delta_f)/dt``.

Only the step response enters the dynamics as an exogenous input. The other
two are absorbed into the aggregate damping and inertia (see
:func:`sfrnadir.model.aggregate_fleet`); the evaluators here are used for
reporting per-resource injections.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import InputError, NonPositiveParameter

if TYPE_CHECKING:
    from .model import Disturbance


@dataclass(frozen=True)
class StepFfr:
    """Delayed ramp to a sustained injection, all in p.u. on system base."""

    p_sus: float = 0.0
    t_1: float = 0.05
    t_2: float = 0.35

    def __post_init__(self):
        if not self.p_sus >= 0.0:
            raise NonPositiveParameter(f"p_sus must be >= 0, got {self.p_sus}")
        if not self.t_1 >= 0.0:
            raise NonPositiveParameter(f"t_1 must be >= 0, got {self.t_1}")
        if not self.t_2 > self.t_1:
            raise InputError(f"t_2 must exceed t_1 (t_1={self.t_1}, t_2={self.t_2})")

    @property
    def ramp_rate(self) -> float:
        return self.p_sus / (self.t_2 - self.t_1)


@dataclass(frozen=True)
class ProportionalFfr:
    r_ibr: float

    def __post_init__(self):
        if not self.r_ibr > 0.0:
            raise NonPositiveParameter(f"r_ibr must be > 0, got {self.r_ibr}")


@dataclass(frozen=True)
class DerivativeFfr:
    h_ibr: float

    def __post_init__(self):
        if not self.h_ibr >= 0.0:
            raise NonPositiveParameter(f"h_ibr must be >= 0, got {self.h_ibr}")


@dataclass(frozen=True)
class DelayedRampInput:
    """``gain * (t - delay) * u(t - delay)``; Laplace image ``gain e^{-delay s} / s^2``."""

    gain: float
    delay: float


@dataclass(frozen=True)
class InputDecomposition:
    """Input power as delayed steps ``c e^{-d s}/s`` plus delayed ramps."""

    step_terms: tuple[tuple[float, float], ...] = ()
    ramp_terms: tuple[DelayedRampInput, ...] = field(default_factory=tuple)

    def value_at(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, d in self.step_terms:
            out = out + np.where(t >= d, c, 0.0)
        for r in self.ramp_terms:
            out = out + np.where(t >= r.delay, r.gain * (t - r.delay), 0.0)
        return out if out.ndim else float(out)


def step_power_at(ffr: StepFfr, t):
    """Step-FFR injection at time ``t`` (scalar or array), p.u."""
    t = np.asarray(t, dtype=float)
    ramp = ffr.p_sus * (t - ffr.t_1) / (ffr.t_2 - ffr.t_1)
    out = np.where(t < ffr.t_1, 0.0, np.where(t > ffr.t_2, ffr.p_sus, ramp))
    return out if out.ndim else float(out)


def decompose_input(ffr: StepFfr, dist: Disturbance) -> InputDecomposition:
    g = ffr.ramp_rate
    return InputDecomposition(
        step_terms=((dist.delta_p_d, 0.0),),
        ramp_terms=(DelayedRampInput(g, ffr.t_1), DelayedRampInput(-g, ffr.t_2)),
    )


def proportional_power(r_ibr: float, delta_f):
    """Droop injection for a frequency deviation in p.u."""
    return -np.asarray(delta_f) / r_ibr if np.ndim(delta_f) else -delta_f / r_ibr


def derivative_power(h_ibr: float, dfdt):
    """Synthetic-inertia injection for a RoCoF in p.u./s."""
    return -2.0 * h_ibr * np.asarray(dfdt) if np.ndim(dfdt) else -2.0 * h_ibr * dfdt
