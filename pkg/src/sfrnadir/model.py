"""System-level SFR parameters, fleet reduction and second-order characteristics.

Conventions: powers are p.u. on ``s_base``; frequency deviations are p.u. of
``f_n``. Unit-level parameters (``h_g``, ``d_g``, ``r_g``, ``r_ibr``, ``h_ibr``
and step-FFR ``p_sus``) are on the unit's own rating and are rescaled by
``rating / s_base`` during aggregation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import (
    HeterogeneousStepTiming,
    InputError,
    NonPositiveParameter,
    NoSynchronousGeneration,
    Overdamped,
    Undamped,
)
from .ffr import DerivativeFfr, ProportionalFfr, StepFfr


def _require(cond: bool, msg: str):
    if not cond:
        raise NonPositiveParameter(msg)


class UnitKind(str, enum.Enum):
    SYNCHRONOUS_GENERATOR = "SynchronousGenerator"
    INVERTER_RESOURCE = "InverterResource"


@dataclass(frozen=True)
class SgParams:
    h_g: float
    d_g: float
    r_g: float
    t_1: float
    t_g: float

    def __post_init__(self):
        _require(self.h_g > 0, f"h_g must be > 0, got {self.h_g}")
        _require(self.d_g >= 0, f"d_g must be >= 0, got {self.d_g}")
        _require(self.r_g > 0, f"r_g must be > 0, got {self.r_g}")
        _require(self.t_1 >= 0, f"t_1 must be >= 0, got {self.t_1}")
        _require(self.t_g > 0, f"t_g must be > 0, got {self.t_g}")
        if not self.t_1 < self.t_g:
            raise InputError(f"governor lead t_1={self.t_1} must be below lag t_g={self.t_g}")


@dataclass(frozen=True)
class FfrPortfolio:
    step: Optional[StepFfr] = None
    proportional: Optional[ProportionalFfr] = None
    derivative: Optional[DerivativeFfr] = None

    def __post_init__(self):
        if self.step is None and self.proportional is None and self.derivative is None:
            raise InputError("an FFR portfolio needs at least one member")


@dataclass(frozen=True)
class UnitRecord:
    id: str
    kind: UnitKind
    rating: float
    sg_params: Optional[SgParams] = None
    ffr: Optional[FfrPortfolio] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", UnitKind(self.kind))
        _require(self.rating > 0, f"unit {self.id!r}: rating must be > 0, got {self.rating}")
        if self.kind is UnitKind.SYNCHRONOUS_GENERATOR:
            if self.sg_params is None or self.ffr is not None:
                raise InputError(f"unit {self.id!r}: a SynchronousGenerator needs sg_params and no ffr")
        elif self.ffr is None or self.sg_params is not None:
            raise InputError(f"unit {self.id!r}: an InverterResource needs ffr and no sg_params")


@dataclass(frozen=True)
class AggregateSfr:
    """Single-machine equivalent with proportional/derivative FFR absorbed."""

    h_sigma: float
    d_sigma: float
    r_g: float
    t_1: float
    t_g: float
    f_n: float = 60.0
    s_base: float = 100.0
    # absorbed inverter shares, kept for per-resource reporting only
    d_ibr: float = 0.0
    h_ibr: float = 0.0

    def __post_init__(self):
        _require(self.h_sigma > 0, f"h_sigma must be > 0, got {self.h_sigma}")
        _require(self.d_sigma >= 0, f"d_sigma must be >= 0, got {self.d_sigma}")
        _require(self.r_g > 0, f"r_g must be > 0, got {self.r_g}")
        _require(self.t_1 >= 0, f"t_1 must be >= 0, got {self.t_1}")
        _require(self.t_g > 0, f"t_g must be > 0, got {self.t_g}")
        _require(self.f_n > 0, f"f_n must be > 0, got {self.f_n}")
        _require(self.s_base > 0, f"s_base must be > 0, got {self.s_base}")
        if not self.t_1 < self.t_g:
            raise InputError(f"governor lead t_1={self.t_1} must be below lag t_g={self.t_g}")
        if not (0.0 <= self.d_ibr <= self.d_sigma and 0.0 <= self.h_ibr <= self.h_sigma):
            raise InputError("absorbed inverter shares must lie within the totals")

    @property
    def stiffness(self) -> float:
        """``D_sigma + 1/R_g``: the steady-state power per p.u. frequency."""
        return self.d_sigma + 1.0 / self.r_g


@dataclass(frozen=True)
class SecondOrderCharacteristics:
    zeta: float
    omega_n: float
    omega_d: float
    phi: float

    @property
    def sigma(self) -> float:
        """Decay rate ``zeta * omega_n`` of the oscillatory mode, 1/s."""
        return self.zeta * self.omega_n


@dataclass(frozen=True)
class Disturbance:
    delta_p_d: float
    label: str = ""

    def __post_init__(self):
        if not math.isfinite(self.delta_p_d):
            raise InputError(f"delta_p_d must be finite, got {self.delta_p_d}")


def aggregate_fleet(units: Sequence[UnitRecord], s_base: float, f_n: float = 60.0) -> AggregateSfr:
    """Reduce a fleet to one equivalent machine on ``s_base``.

    Inertia, damping and inverse droop are capacity-weighted sums; governor
    time constants are capacity-weighted means over synchronous units.
    Proportional and derivative FFR are folded into damping and inertia;
    step FFR is left out (see :func:`collect_step_ffr`).
    """
    _require(s_base > 0, f"s_base must be > 0, got {s_base}")
    if not units:
        raise NoSynchronousGeneration("fleet is empty")
    sgs = [u for u in units if u.kind is UnitKind.SYNCHRONOUS_GENERATOR]
    if not sgs:
        raise NoSynchronousGeneration("fleet has no synchronous generator; governor path undefined")

    h_g = d_g = inv_r = 0.0
    t1_w = tg_w = sg_rating = 0.0
    for u in sgs:
        w = u.rating / s_base
        p = u.sg_params
        h_g += p.h_g * w
        d_g += p.d_g * w
        inv_r += w / p.r_g
        t1_w += p.t_1 * u.rating
        tg_w += p.t_g * u.rating
        sg_rating += u.rating

    h_ibr = d_ibr = 0.0
    for u in units:
        if u.kind is not UnitKind.INVERTER_RESOURCE:
            continue
        w = u.rating / s_base
        if u.ffr.derivative is not None:
            h_ibr += u.ffr.derivative.h_ibr * w
        if u.ffr.proportional is not None:
            d_ibr += w / u.ffr.proportional.r_ibr

    return AggregateSfr(
        h_sigma=h_g + h_ibr,
        d_sigma=d_g + d_ibr,
        r_g=1.0 / inv_r,
        t_1=t1_w / sg_rating,
        t_g=tg_w / sg_rating,
        f_n=f_n,
        s_base=s_base,
        d_ibr=d_ibr,
        h_ibr=h_ibr,
    )


def collect_step_ffr(units: Sequence[UnitRecord], s_base: float) -> StepFfr:
    """Sum step-FFR members into one system-base injection with shared timing."""
    _require(s_base > 0, f"s_base must be > 0, got {s_base}")
    members = [(u, u.ffr.step) for u in units if u.ffr is not None and u.ffr.step is not None]
    if not members:
        return StepFfr(p_sus=0.0)
    _, first = members[0]
    p_sus = 0.0
    for u, step in members:
        if step.t_1 != first.t_1 or step.t_2 != first.t_2:
            raise HeterogeneousStepTiming(
                f"unit {u.id!r} has step timing ({step.t_1}, {step.t_2}); "
                f"expected ({first.t_1}, {first.t_2})"
            )
        p_sus += step.p_sus * u.rating / s_base
    return StepFfr(p_sus=p_sus, t_1=first.t_1, t_2=first.t_2)


# Closed forms are not used within this distance of critical damping.
CRITICAL_GUARD_BAND = 1e-3


def characteristics(agg: AggregateSfr) -> SecondOrderCharacteristics:
    """Damping ratio and natural frequencies of the closed-loop pole pair.

    Raises :class:`Overdamped` for ``zeta >= 1`` and :class:`Undamped` for
    ``zeta <= 0``.
    """
    h, d, tg = agg.h_sigma, agg.d_sigma, agg.t_g
    inv_r = 1.0 / agg.r_g
    zeta = 0.5 * ((d + agg.t_1 / tg * inv_r) / (2.0 * h) + 1.0 / tg) * math.sqrt(
        2.0 * tg * h / (d + inv_r)
    )
    omega_n = math.sqrt((d + inv_r) / (2.0 * tg * h))
    if zeta >= 1.0:
        raise Overdamped(f"zeta={zeta:.6g} >= 1; closed form does not apply, use the ODE oracle")
    if zeta <= 0.0:
        raise Undamped(f"zeta={zeta:.6g} <= 0")
    return SecondOrderCharacteristics(
        zeta=zeta,
        omega_n=omega_n,
        omega_d=omega_n * math.sqrt(1.0 - zeta * zeta),
        phi=math.acos(zeta),
    )


def ieeeg1_lead_lag(k: Sequence[float], t_4: float, t_5: float, method: str = "steam_chest"):
    """Approximate an IEEEG1 steam turbine by one lead-lag ``(1 + t_1 s)/(1 + t_g s)``.

    Both reductions are approximate; pass ``t_1`` and ``t_g`` directly when a
    better one is known.

    ``"steam_chest"`` (default) keeps the steam-chest constant as the lead,
    ``t_1 = T4``, and the reheater as the lag, ``t_g = T5``.
    ``"reheat"`` is the textbook single-reheat form: ``t_g = T5`` and
    ``t_1 = F_hp T5`` where ``F_hp = (K1 + K2) / sum(K)`` is the power share
    delivered ahead of the reheater. It neglects ``T4``, ``T6`` and ``T7`` and
    tends to give a much better damped (often overdamped) loop.

    ``k`` holds ``K1..K8``; missing trailing entries are zero.
    """
    if method not in ("steam_chest", "reheat"):
        raise InputError(f"method must be 'steam_chest' or 'reheat', got {method!r}")
    if not t_5 > 0:
        # no reheater: the steam chest is the dominant lag
        return 0.0, float(t_4)
    if method == "steam_chest":
        if not t_4 < t_5:
            raise InputError(f"T4={t_4} must be below T5={t_5} to serve as the lead")
        return float(t_4), float(t_5)
    k = list(k) + [0.0] * (8 - len(k))
    total = sum(k)
    if not total > 0:
        raise InputError("IEEEG1 stage fractions K1..K8 must sum to a positive value")
    f_hp = (k[0] + k[1]) / total
    return f_hp * t_5, float(t_5)
