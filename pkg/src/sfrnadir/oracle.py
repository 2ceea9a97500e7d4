"""Fixed-step RK4 reference integrator for the simplified SFR model.

State is ``(delta_f, z)`` where ``z`` is the lag state of the governor
lead-lag, realised as feed-through plus lag::

    u  = -delta_f / R_g
    y  = (T_1/T_g) u + (1 - T_1/T_g) z          (governor output delta_P_m)
    z' = (u - z) / T_g
    delta_f' = (y + dP_d + P_ffr1(t) - D delta_f) / (2 H)

The step-FFR input is evaluated exactly at every stage time. A step that
straddles one of the ramp breakpoints is split there, so the output grid
stays uniform while the integrator never steps across an input kink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _accel
from .analytic import Method, NadirReport
from .errors import NoDip, NonFinite, StepTooLarge
from .ffr import StepFfr, step_power_at
from .model import AggregateSfr, Disturbance

DEFAULT_DT = 1e-4
DEFAULT_HORIZON = 60.0


def _rk4_sfr(h2, damping, inv_r, lead, tg, dpd, p_sus, t1, t2, dt, n_steps, out_f, out_z):
    """Integrate ``n_steps`` RK4 steps from rest; returns the first non-finite index or -1."""
    f = 0.0
    z = 0.0
    out_f[0] = 0.0
    out_z[0] = 0.0
    lag = 1.0 - lead
    ramp = p_sus / (t2 - t1)
    tiny = 1e-9 * dt
    for n in range(n_steps):
        t_end = (n + 1) * dt
        cur = n * dt
        for k in range(3):
            if k == 0:
                nxt = t1
            elif k == 1:
                nxt = t2
            else:
                nxt = t_end
            if k < 2 and not (nxt - cur > tiny and t_end - nxt > tiny):
                continue
            h = nxt - cur
            # stage 1
            tt = cur
            p = 0.0 if tt < t1 else (p_sus if tt > t2 else ramp * (tt - t1))
            u = -f * inv_r
            k1f = (lead * u + lag * z + dpd + p - damping * f) / h2
            k1z = (u - z) / tg
            # stage 2
            tt = cur + 0.5 * h
            p = 0.0 if tt < t1 else (p_sus if tt > t2 else ramp * (tt - t1))
            fs = f + 0.5 * h * k1f
            zs = z + 0.5 * h * k1z
            u = -fs * inv_r
            k2f = (lead * u + lag * zs + dpd + p - damping * fs) / h2
            k2z = (u - zs) / tg
            # stage 3
            fs = f + 0.5 * h * k2f
            zs = z + 0.5 * h * k2z
            u = -fs * inv_r
            k3f = (lead * u + lag * zs + dpd + p - damping * fs) / h2
            k3z = (u - zs) / tg
            # stage 4
            tt = nxt
            p = 0.0 if tt < t1 else (p_sus if tt > t2 else ramp * (tt - t1))
            fs = f + h * k3f
            zs = z + h * k3z
            u = -fs * inv_r
            k4f = (lead * u + lag * zs + dpd + p - damping * fs) / h2
            k4z = (u - zs) / tg
            f = f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
            z = z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            cur = nxt
        if not (math.isfinite(f) and math.isfinite(z)):
            return n + 1
        out_f[n + 1] = f
        out_z[n + 1] = z
    return -1


RK4_KERNELS = _accel.jit_pair(_rk4_sfr)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled solution; every column is an array of equal length."""

    dt: float
    t: np.ndarray
    delta_f: np.ndarray
    p_m: Optional[np.ndarray] = None
    p_ffr1: Optional[np.ndarray] = None
    p_ffr2: Optional[np.ndarray] = None
    p_ffr3: Optional[np.ndarray] = None
    dfdt: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.t)


def state_matrix(agg: AggregateSfr) -> np.ndarray:
    """Linear part of the oracle dynamics on ``(delta_f, z)``."""
    lead = agg.t_1 / agg.t_g
    inv_r = 1.0 / agg.r_g
    h2 = 2.0 * agg.h_sigma
    return np.array(
        [
            [(-lead * inv_r - agg.d_sigma) / h2, (1.0 - lead) / h2],
            [-inv_r / agg.t_g, -1.0 / agg.t_g],
        ]
    )


def integrate(
    agg: AggregateSfr,
    step: StepFfr,
    dist: Disturbance,
    dt: float = DEFAULT_DT,
    horizon: float = DEFAULT_HORIZON,
    use_numba: Optional[bool] = None,
) -> Trajectory:
    """Classic RK4 from rest over ``[0, horizon]`` on a uniform grid of step ``dt``."""
    if not dt > 0.0:
        raise StepTooLarge(f"dt must be > 0, got {dt}")
    if dt > step.t_2 - step.t_1:
        raise StepTooLarge(f"dt={dt} exceeds the step-FFR ramp duration {step.t_2 - step.t_1}")
    if dt > agg.t_g / 100.0:
        raise StepTooLarge(f"dt={dt} exceeds T_g/100={agg.t_g / 100.0}")
    if not horizon > 0.0:
        raise StepTooLarge(f"horizon must be > 0, got {horizon}")
    n_steps = int(round(horizon / dt))

    if use_numba is None:
        kernel = _accel.select(RK4_KERNELS)
    else:
        py, jitted = RK4_KERNELS
        kernel = jitted if use_numba and jitted is not None else py

    out_f = np.empty(n_steps + 1)
    out_z = np.empty(n_steps + 1)
    h2 = 2.0 * agg.h_sigma
    inv_r = 1.0 / agg.r_g
    lead = agg.t_1 / agg.t_g
    bad = kernel(
        h2, agg.d_sigma, inv_r, lead, agg.t_g, dist.delta_p_d,
        step.p_sus, step.t_1, step.t_2, dt, n_steps, out_f, out_z,
    )  # fmt: skip
    if bad >= 0:
        raise NonFinite(bad * dt)

    t = np.arange(n_steps + 1) * dt
    p_ffr1 = np.asarray(step_power_at(step, t))
    p_m = lead * (-out_f * inv_r) + (1.0 - lead) * out_z
    dfdt = (p_m + dist.delta_p_d + p_ffr1 - agg.d_sigma * out_f) / h2
    return Trajectory(
        dt=dt,
        t=t,
        delta_f=out_f,
        p_m=p_m,
        p_ffr1=p_ffr1,
        p_ffr2=-agg.d_ibr * out_f,
        p_ffr3=-2.0 * agg.h_ibr * dfdt,
        dfdt=dfdt,
    )


def _refine_minimum(traj: Trajectory, i: int) -> tuple[float, float]:
    """Vertex of the parabola through samples ``i-1, i, i+1``."""
    if i == 0 or i == len(traj) - 1:
        return float(traj.t[i]), float(traj.delta_f[i])
    y0, y1, y2 = traj.delta_f[i - 1], traj.delta_f[i], traj.delta_f[i + 1]
    curv = y0 - 2.0 * y1 + y2
    if curv <= 0.0:
        return float(traj.t[i]), float(y1)
    off = 0.5 * (y0 - y2) / curv
    return float(traj.t[i] + off * traj.dt), float(y1 - 0.25 * (y0 - y2) * off)


def extract_nadir(
    traj: Trajectory,
    f_n: float,
    ufls_threshold: Optional[float] = None,
    delta_f_ss: Optional[float] = None,
) -> NadirReport:
    """Nadir of a sampled trajectory, refined by local quadratic interpolation."""
    if len(traj) == 0:
        raise NoDip("empty trajectory")
    i = int(np.argmin(traj.delta_f))
    if not traj.delta_f[i] < traj.delta_f[0]:
        raise NoDip("trajectory never falls below its initial value")
    t_n, df_n = _refine_minimum(traj, i)
    if traj.dfdt is not None:
        rocof = float(np.max(np.abs(traj.dfdt)))
    else:
        rocof = float(np.max(np.abs(np.diff(traj.delta_f)))) / traj.dt
    f_nadir = f_n * (1.0 + df_n)
    threshold = math.nan if ufls_threshold is None else ufls_threshold
    return NadirReport(
        f_nadir=f_nadir,
        t_nadir=t_n,
        delta_f_ss=float(traj.delta_f[-1]) if delta_f_ss is None else delta_f_ss,
        max_rocof=f_n * rocof,
        ufls_margin=f_nadir - threshold,
        method=Method.ORACLE,
        delta_f_nadir=df_n,
    )


@dataclass(frozen=True)
class ConvergenceStudy:
    dts: tuple[float, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]
    richardson_orders: tuple[float, ...]


def convergence_study(
    agg: AggregateSfr,
    step: StepFfr,
    dist: Disturbance,
    dts: Sequence[float],
    horizon: float,
    reference=None,
) -> ConvergenceStudy:
    """Empirical RK4 order over a dt-halving sequence.

    ``errors`` are max-abs deviations on the coarsest grid from ``reference``
    (a callable of time) when given. ``richardson_orders`` use only the
    numerical solutions: ``log2(|y_h - y_{h/2}| / |y_{h/2} - y_{h/4}|)``.
    """
    dts = tuple(float(x) for x in dts)
    coarse = dts[0]
    sols = []
    for h in dts:
        tr = integrate(agg, step, dist, dt=h, horizon=horizon)
        stride = int(round(coarse / h))
        sols.append(tr.delta_f[::stride])
    t = np.arange(len(sols[0])) * coarse
    errors: tuple[float, ...] = ()
    orders: tuple[float, ...] = ()
    if reference is not None:
        ref = reference(t)
        errors = tuple(float(np.max(np.abs(s - ref))) for s in sols)
        orders = tuple(math.log2(a / b) for a, b in zip(errors, errors[1:]))
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(sols, sols[1:])]
    rich = tuple(math.log2(a / b) for a, b in zip(diffs, diffs[1:]))
    return ConvergenceStudy(dts, errors, orders, rich)
