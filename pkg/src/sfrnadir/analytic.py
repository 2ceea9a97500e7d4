"""Closed-form frequency trajectory of the simplified SFR model.

The frequency deviation is the response of

    G(s) = (s + 1/T_g) / (2 H (s^2 + 2 zeta w_n s + w_n^2))

to the input ``dP_d/s + g (e^{-t1 s} - e^{-t2 s}) / s^2`` with
``g = p_sus / (t2 - t1)``. Each input term is inverted by residues at the
origin and at the underdamped pole pair, then shifted by its delay. The
governor output uses the same machinery with numerator
``-(1 + T_1 s) / (2 H T_g R_g)``.

The late-time coefficient block (M, alpha, beta, m(t)) and the nadir
expression are available verbatim through :func:`literal_coefficients` and
checked by :func:`cross_check_literal`; they are never the reference.
"""

from __future__ import annotations

import cmath
import enum
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _accel
from .errors import DegenerateAmplitude, NoDip, Overdamped
from .ffr import StepFfr, decompose_input
from .model import (
    CRITICAL_GUARD_BAND,
    AggregateSfr,
    Disturbance,
    SecondOrderCharacteristics,
    characteristics,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class Method(str, enum.Enum):
    ANALYTIC = "Analytic"
    ORACLE = "Oracle"


@dataclass(frozen=True)
class ModalTerm:
    """``amplitude e^{-sigma (t-d)} sin(w_d (t-d) + phase)`` for ``t >= d``.

    ``const`` and ``slope`` give the polynomial part ``const + slope (t-d)``.
    """

    amplitude: float
    phase: float
    delay: float
    const: float = 0.0
    slope: float = 0.0


@dataclass(frozen=True)
class _Term:
    delay: float
    const: float
    slope: float
    residue: complex


@dataclass(frozen=True)
class ClosedFormSolution:
    agg: AggregateSfr
    step: StepFfr
    dist: Disturbance
    chars: SecondOrderCharacteristics
    steady_state: float
    modal_terms: tuple[ModalTerm, ...]
    beta: float
    m_amplitude: float
    alpha: float
    _terms: tuple[_Term, ...] = field(repr=False, default=())
    _rows: Optional[np.ndarray] = field(repr=False, default=None)

    @functools.cached_property
    def _gov_rows(self) -> np.ndarray:
        h2 = 2.0 * self.agg.h_sigma
        k = -1.0 / (h2 * self.agg.t_g * self.agg.r_g)
        terms = _input_terms(k, k * self.agg.t_1, self.chars, self.step, self.dist)
        return _rows(terms, self.pole)[0]

    @property
    def pole(self) -> complex:
        return complex(-self.chars.sigma, self.chars.omega_d)

    @property
    def breakpoints(self) -> tuple[float, float]:
        return self.step.t_1, self.step.t_2

    @property
    def late_scale(self) -> float:
        """Prefactor multiplying ``M e^{-sigma t} sin(w_d t + alpha)`` for ``t > t_2``."""
        c = self.chars
        a = 1.0 / self.agg.t_g
        return abs(self.pole + a) / (
            2.0 * self.agg.h_sigma * c.omega_n**2 * c.omega_d * (self.step.t_2 - self.step.t_1)
        )


@dataclass(frozen=True)
class NadirReport:
    f_nadir: float
    t_nadir: float
    delta_f_ss: float
    max_rocof: float
    ufls_margin: float
    method: Method
    delta_f_nadir: float = 0.0
    primary_path: Optional[bool] = None
    literal_delta_f_nadir: Optional[float] = None
    literal_t_nadir: Optional[float] = None


# ---------------------------------------------------------------------------
# residue calculus


def _input_terms(num0: float, num1: float, chars, step: StepFfr, dist: Disturbance):
    """Inverse-Laplace pieces of ``(num0 + num1 s) / Q(s)`` driven by the decomposed input."""
    w2 = chars.omega_n**2
    sigma = chars.sigma
    p = complex(-sigma, chars.omega_d)
    n_p = num0 + num1 * p
    two_jwd = 2j * chars.omega_d
    # 1/s: residue at 0 and at p
    step_res0 = num0 / w2
    step_resp = n_p / (p * two_jwd)
    # 1/s^2: Laurent coefficients at 0 and residue at p
    ramp_a2 = num0 / w2
    ramp_a1 = (num1 * w2 - num0 * 2.0 * sigma) / (w2 * w2)
    ramp_resp = n_p / (p * p * two_jwd)

    dec = decompose_input(step, dist)
    terms = []
    for c, d in dec.step_terms:
        terms.append(_Term(d, c * step_res0, 0.0, c * step_resp))
    for r in dec.ramp_terms:
        terms.append(_Term(r.delay, r.gain * ramp_a1, r.gain * ramp_a2, r.gain * ramp_resp))
    return tuple(terms)


def solve(agg: AggregateSfr, step: StepFfr, dist: Disturbance) -> ClosedFormSolution:
    """Exact piecewise-analytic frequency response for an underdamped system."""
    chars = characteristics(agg)
    if 1.0 - chars.zeta < CRITICAL_GUARD_BAND:
        raise Overdamped(
            f"zeta={chars.zeta:.6g} is within {CRITICAL_GUARD_BAND} of critical damping; "
            "use the ODE oracle"
        )
    h2 = 2.0 * agg.h_sigma
    a = 1.0 / agg.t_g
    terms = _input_terms(a / h2, 1.0 / h2, chars, step, dist)

    modal = tuple(
        ModalTerm(2.0 * abs(t.residue), cmath.phase(t.residue) + 0.5 * math.pi, t.delay, t.const, t.slope)
        for t in terms
    )

    # collapse the late (t > t2) oscillation into K M e^{-sigma t} sin(w_d t + alpha)
    p = complex(-chars.sigma, chars.omega_d)
    s_late = sum(t.residue * cmath.exp(-p * t.delay) for t in terms)
    theta = cmath.phase(p + a)
    sol = ClosedFormSolution(
        agg=agg,
        step=step,
        dist=dist,
        chars=chars,
        steady_state=(step.p_sus + dist.delta_p_d) / agg.stiffness,
        modal_terms=modal,
        beta=theta - chars.phi,
        m_amplitude=0.0,
        alpha=0.0,
        _terms=terms,
        _rows=_rows(terms, p),
    )
    m_amp = 2.0 * abs(s_late) / sol.late_scale
    alpha = (cmath.phase(s_late) + 0.5 * math.pi) % TWO_PI
    object.__setattr__(sol, "m_amplitude", m_amp)
    object.__setattr__(sol, "alpha", alpha)
    return sol


# ---------------------------------------------------------------------------
# evaluation


def _rows(terms, pole: complex) -> np.ndarray:
    """Rows ``(delay, a, b, c0, c1)`` for derivative orders 0, 1 and 2, shape ``(3, n, 5)``.

    Each row contributes ``e^{-sigma tau}(a cos w_d tau - b sin w_d tau) + c0 + c1 tau``
    for ``tau = t - delay >= 0``.
    """
    out = []
    for order in range(3):
        pk = 2.0 * pole**order
        for term in terms:
            rk = term.residue * pk
            if order == 0:
                out.append((term.delay, rk.real, rk.imag, term.const, term.slope))
            elif order == 1:
                out.append((term.delay, rk.real, rk.imag, term.slope, 0.0))
            else:
                out.append((term.delay, rk.real, rk.imag, 0.0, 0.0))
    return np.array(out, dtype=float).reshape(3, len(terms), 5)


def _scalar_kernel(rows, sigma, wd, t):
    total = 0.0
    for i in range(rows.shape[0]):
        tau = t - rows[i, 0]
        if tau >= 0.0:
            total += (
                math.exp(-sigma * tau) * (rows[i, 1] * math.cos(wd * tau) - rows[i, 2] * math.sin(wd * tau))
                + rows[i, 3]
                + rows[i, 4] * tau
            )
    return total


def _all_negative_kernel(rows, sigma, wd, lo, hi, n):
    """True when the row sum is negative at every point of an ``n``-interval grid on [lo, hi]."""
    for j in range(n + 1):
        t = lo + (hi - lo) * j / n
        total = 0.0
        for i in range(rows.shape[0]):
            tau = t - rows[i, 0]
            if tau >= 0.0:
                total += (
                    math.exp(-sigma * tau) * (rows[i, 1] * math.cos(wd * tau) - rows[i, 2] * math.sin(wd * tau))
                    + rows[i, 3]
                    + rows[i, 4] * tau
                )
        if not total < 0.0:
            return False
    return True


SCALAR_KERNELS = _accel.jit_pair(_scalar_kernel)
ALL_NEGATIVE_KERNELS = _accel.jit_pair(_all_negative_kernel)
_scalar = _accel.select(SCALAR_KERNELS)
_all_negative = _accel.select(ALL_NEGATIVE_KERNELS)


def warm_up():
    """Compile or load the evaluation kernels so later calls carry no JIT cost."""
    rows = np.zeros((1, 5))
    _scalar(rows, 0.1, 1.0, 0.5)
    _all_negative(rows, 0.1, 1.0, 0.0, 1.0, 8)


def _vector(rows, sigma, wd, t):
    out = np.zeros_like(t)
    for d, a, b, c0, c1 in rows:
        tau = t - d
        active = tau >= 0.0
        tau = np.where(active, tau, 0.0)
        val = np.exp(-sigma * tau) * (a * np.cos(wd * tau) - b * np.sin(wd * tau)) + c0 + c1 * tau
        out += np.where(active, val, 0.0)
    return out


def _evaluate(rows, sol: ClosedFormSolution, t):
    sigma, wd = sol.chars.sigma, sol.chars.omega_d
    if isinstance(t, (float, int)) or np.ndim(t) == 0:
        return _scalar(rows, sigma, wd, float(t))
    return _vector(rows, sigma, wd, np.asarray(t, dtype=float))


def evaluate(sol: ClosedFormSolution, t):
    """Frequency deviation in p.u. at ``t`` (scalar or array)."""
    return _evaluate(sol._rows[0], sol, t)


def evaluate_derivative(sol: ClosedFormSolution, t):
    """Exact d(delta_f)/dt in p.u./s; the right-hand limit at ``t = 0``."""
    return _evaluate(sol._rows[1], sol, t)


def evaluate_second_derivative(sol: ClosedFormSolution, t):
    return _evaluate(sol._rows[2], sol, t)


def governor_output(sol: ClosedFormSolution, t):
    """Turbine-governor power change ``delta_P_m`` in p.u."""
    return _evaluate(sol._gov_rows, sol, t)


# ---------------------------------------------------------------------------
# nadir


def _late_stationary_points(sol: ClosedFormSolution, count: int = 2):
    """First stationary points after t2 of ``ss + C e^{-sigma t} sin(w_d t + alpha)``.

    The derivative vanishes where ``w_d t + alpha = phi + k pi``.
    """
    c = sol.chars
    t2 = sol.step.t_2
    base = (c.phi - sol.alpha) / c.omega_d
    half = math.pi / c.omega_d
    k = math.floor((t2 - base) / half) + 1
    return [base + (k + i) * half for i in range(count)]


def _late_minimum(sol: ClosedFormSolution) -> float:
    """First local minimum after t2: ``w_d t + alpha = pi + phi (mod 2 pi)``."""
    c = sol.chars
    t2 = sol.step.t_2
    base = (math.pi + c.phi - sol.alpha) / c.omega_d
    period = TWO_PI / c.omega_d
    k = math.floor((t2 - base) / period) + 1
    return base + k * period


def _early_intervals(sol: ClosedFormSolution, lo: float, hi: float) -> int:
    return max(8, int(math.ceil((hi - lo) / (math.pi / (8.0 * sol.chars.omega_d)))))


def _early_grid(sol: ClosedFormSolution, lo: float, hi: float):
    n = _early_intervals(sol, lo, hi)
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def _segment_roots(sol: ClosedFormSolution, lo: float, hi: float):
    """Roots of the derivative on [lo, hi) bracketed on a grid and refined by Brent."""
    if hi <= lo:
        return []
    eps = 1e-12 * max(1.0, hi)
    grid = _early_grid(sol, lo, hi - eps)
    vals = [evaluate_derivative(sol, t) for t in grid]
    roots = []
    for (ta, fa), (tb, fb) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if fa == 0.0:
            roots.append(ta)
        elif fa * fb < 0.0:
            roots.append(brentq(lambda x: evaluate_derivative(sol, x), ta, tb, xtol=1e-12, rtol=4 * np.finfo(float).eps))
    return roots


def _locate_nadir(sol: ClosedFormSolution) -> tuple[float, bool]:
    """Return ``(t_nadir, primary_path_used)``."""
    if sol.m_amplitude == 0.0 and all(t.residue == 0 for t in sol._terms):
        raise NoDip("zero input; the frequency stays at its rated value")
    t1, t2 = sol.breakpoints

    # primary: closed-form nadir time after t2, validated
    t_c = _late_minimum(sol)
    if sol.m_amplitude > 0.0:
        d1 = evaluate_derivative(sol, t_c)
        d2 = evaluate_second_derivative(sol, t_c)
        early_falling = _all_negative(
            sol._rows[1], sol.chars.sigma, sol.chars.omega_d, 0.0, t2, _early_intervals(sol, 0.0, t2)
        )
        if abs(d1) <= 1e-10 and d2 > 0.0 and early_falling and evaluate(sol, t_c) < 0.0:
            return t_c, True

    # fallback: enumerate every stationary point
    cands = _segment_roots(sol, 0.0, t1) + _segment_roots(sol, t1, t2)
    if sol.m_amplitude > 0.0:
        cands += _late_stationary_points(sol)
    if not cands:
        raise NoDip("no stationary point; frequency is monotone")
    vals = [evaluate(sol, t) for t in cands]
    i = int(np.argmin(vals))
    if not vals[i] < 0.0:
        raise NoDip("frequency never drops below its initial value")
    if cands[i] <= t2:
        log.warning(
            "nadir at t=%.6g s precedes full step-FFR deployment (t2=%.6g s); "
            "the late-time nadir formula does not apply",
            cands[i],
            t2,
        )
    return cands[i], False


def nadir_time(sol: ClosedFormSolution) -> float:
    """Time of the global minimum of the frequency deviation."""
    return _locate_nadir(sol)[0]


def max_rocof(sol: ClosedFormSolution, horizon: float) -> float:
    """Largest |d delta_f/dt| in p.u./s over [0, horizon], including t = 0+."""
    dt = min(0.01, math.pi / (50.0 * sol.chars.omega_d))
    n = max(2, int(math.ceil(horizon / dt)) + 1)
    grid = np.linspace(0.0, horizon, n)
    initial = abs(sol.dist.delta_p_d / (2.0 * sol.agg.h_sigma))
    return max(initial, float(np.max(np.abs(evaluate_derivative(sol, grid)))))


def nadir_frequency(
    sol: ClosedFormSolution,
    f_n: float,
    ufls_threshold: Optional[float] = None,
    literal: bool = True,
    rocof: bool = True,
) -> NadirReport:
    """Nadir report in Hz; the literal closed-form nadir is attached for comparison.

    With ``rocof=False`` the dense RoCoF scan is skipped and ``max_rocof`` is NaN.
    """
    threshold = math.nan if ufls_threshold is None else ufls_threshold
    if sol.dist.delta_p_d == 0.0 and sol.step.p_sus == 0.0:
        return NadirReport(
            f_nadir=f_n,
            t_nadir=0.0,
            delta_f_ss=0.0,
            max_rocof=0.0,
            ufls_margin=f_n - threshold,
            method=Method.ANALYTIC,
        )
    t_n, primary = _locate_nadir(sol)
    df = evaluate(sol, t_n)
    f_nadir = f_n * (1.0 + df)
    lit_df = lit_t = None
    if literal:
        try:
            pc = literal_coefficients(sol.agg, sol.step, sol.dist)
            lit_df, lit_t = pc.delta_f_nadir, pc.t_nadir
        except DegenerateAmplitude:
            pass
    return NadirReport(
        f_nadir=f_nadir,
        t_nadir=t_n,
        delta_f_ss=sol.steady_state,
        max_rocof=f_n * max_rocof(sol, t_n) if rocof else math.nan,
        ufls_margin=f_nadir - threshold,
        method=Method.ANALYTIC,
        delta_f_nadir=df,
        primary_path=primary,
        literal_delta_f_nadir=lit_df,
        literal_t_nadir=lit_t,
    )


# ---------------------------------------------------------------------------
# literal late-time closed form (M, alpha, beta, m(t)) and its corrected variant


@dataclass(frozen=True)
class LiteralCoefficients:
    radical: float
    beta: float
    m0: float
    m_quarter: float
    m_amplitude: float
    alpha: float
    steady_state: float
    prefactor: float
    t_nadir: float
    delta_f_nadir: float
    chars: SecondOrderCharacteristics
    t_2: float
    corrected: bool

    def delta_f(self, t):
        """Late-time trajectory ``ss + K M e^{-sigma t} sin(w_d t + alpha)``, valid for ``t > t_2``."""
        t = np.asarray(t, dtype=float)
        c = self.chars
        out = self.steady_state + self.prefactor * np.exp(-c.sigma * t) * self.m_amplitude * np.sin(
            c.omega_d * t + self.alpha
        )
        return out if out.ndim else float(out)


def literal_coefficients(
    agg: AggregateSfr, step: StepFfr, dist: Disturbance, corrected: bool = False
) -> LiteralCoefficients:
    """Late-time coefficient block and nadir expressions.

    With ``corrected=False`` every expression is taken verbatim: radical
    ``sqrt(w_n^2 - 2 zeta/T_g + 1/T_g^2)``, ramp phases ``-beta - phi``,
    ``alpha = pi - asin(m(0)/M)``, ``t_nadir = (pi + phi - alpha)/w_d`` and
    ``ss - T_g R_g^{-1/2} M e^{(alpha - phi - pi) cot phi} / ((t2 - t1) (D + 1/R)^{3/2})``.

    ``corrected=True`` applies the fixes the residue derivation requires:
    the radical is ``|p + 1/T_g| = sqrt(w_n^2 - 2 zeta w_n/T_g + 1/T_g^2)``,
    the ramp phases are ``-beta + phi``, alpha is taken on the full circle,
    the nadir time is moved to the first minimum after ``t_2`` (with the decay
    factor evaluated at that time) and the nadir gain is ``T_g sqrt((1 - T_1/T_g)/R_g)`` (equal to the literal one only for
    ``T_1 = 0``).

    NaN propagates when a radical or arcsine argument leaves its domain;
    :class:`DegenerateAmplitude` is raised when ``M == 0``.
    """
    c = characteristics(agg)
    wn, wd, zeta, phi, sigma = c.omega_n, c.omega_d, c.zeta, c.phi, c.sigma
    tg, t1, t2 = agg.t_g, step.t_1, step.t_2
    p_sus, dpd = step.p_sus, dist.delta_p_d
    cross = 2.0 * zeta * (wn if corrected else 1.0) / tg
    ramp_phase = phi if corrected else -phi
    with np.errstate(invalid="ignore"):
        radical = float(np.sqrt(np.float64(wn**2 - cross + tg**-2)))
        beta = float(np.arcsin(np.float64(math.sqrt(1.0 - zeta**2) / tg / radical)))

    def m(t):
        return (
            p_sus * math.exp(sigma * t2) * math.sin(wd * (t - t2) - beta + ramp_phase)
            - p_sus * math.exp(sigma * t1) * math.sin(wd * (t - t1) - beta + ramp_phase)
            + dpd * wn * (t2 - t1) * math.sin(wd * t - beta)
        )

    if math.isnan(beta):
        m0 = mq = m_amp = alpha = math.nan
    else:
        m0, mq = m(0.0), m(math.pi / (2.0 * wd))
        m_amp = math.hypot(m0, mq)
        if m_amp == 0.0:
            raise DegenerateAmplitude("M = 0: no oscillatory component")
        if corrected:
            alpha = math.atan2(m0, mq)
        else:
            alpha = math.pi - math.asin(max(-1.0, min(1.0, m0 / m_amp)))

    stiff = agg.stiffness
    ss = (p_sus + dpd) / stiff
    prefactor = radical / (2.0 * agg.h_sigma * wn**2 * wd * (t2 - t1))
    t_nadir = (math.pi + phi - alpha) / wd
    if corrected and not math.isnan(t_nadir):
        period = TWO_PI / wd
        t_nadir += (math.floor((t2 - t_nadir) / period) + 1) * period
        gain = tg * math.sqrt((1.0 - agg.t_1 / tg) / agg.r_g)
    else:
        gain = tg * agg.r_g**-0.5
    # (alpha - phi - pi) cot(phi) is -sigma t_nadir only for the unshifted nadir time
    decay = -sigma * t_nadir if corrected else (alpha - phi - math.pi) / math.tan(phi)
    df_nadir = ss - gain * m_amp * math.exp(decay) / ((t2 - t1) * stiff**1.5)
    return LiteralCoefficients(
        radical=radical,
        beta=beta,
        m0=m0,
        m_quarter=mq,
        m_amplitude=m_amp,
        alpha=alpha,
        steady_state=ss,
        prefactor=prefactor,
        t_nadir=t_nadir,
        delta_f_nadir=df_nadir,
        chars=c,
        t_2=t2,
        corrected=corrected,
    )


@dataclass(frozen=True)
class LiteralCheck:
    agrees: bool
    max_trajectory_error: float
    nadir_error: float
    t_nadir_error: float
    params: dict


def _nan_max(*xs):
    return max(math.inf if math.isnan(x) else x for x in xs)


def cross_check_literal(
    sol: ClosedFormSolution, tol: float = 1e-9, n_samples: int = 64, corrected: bool = False
) -> LiteralCheck:
    """Compare the late-time coefficient formulas with the residue-based solution.

    Trajectory and nadir values are compared in p.u., the nadir time in
    seconds. Disagreements beyond ``tol`` are logged with the full parameter
    set; the residue solution is the reference.
    """
    params = {
        "h_sigma": sol.agg.h_sigma,
        "d_sigma": sol.agg.d_sigma,
        "r_g": sol.agg.r_g,
        "t_1_gov": sol.agg.t_1,
        "t_g": sol.agg.t_g,
        "delta_p_d": sol.dist.delta_p_d,
        "p_sus": sol.step.p_sus,
        "t_1": sol.step.t_1,
        "t_2": sol.step.t_2,
    }
    try:
        lc = literal_coefficients(sol.agg, sol.step, sol.dist, corrected=corrected)
    except DegenerateAmplitude:
        return LiteralCheck(True, 0.0, 0.0, 0.0, params)
    t2 = sol.step.t_2
    ts = np.linspace(t2 + 1e-6, t2 + 4.0 * TWO_PI / sol.chars.omega_d, n_samples)
    with np.errstate(invalid="ignore"):
        traj_err = float(np.max(np.abs(lc.delta_f(ts) - evaluate(sol, ts))))
    t_n = nadir_time(sol)
    nadir_err = abs(lc.delta_f_nadir - evaluate(sol, t_n))
    t_err = abs(lc.t_nadir - t_n)
    agrees = _nan_max(traj_err, nadir_err, t_err) <= tol
    if not agrees:
        log.warning(
            "%s closed form disagrees with residue solution: trajectory %.3g, nadir %.3g p.u., "
            "t_nadir %.3g s; params=%s",
            "corrected" if corrected else "literal",
            traj_err,
            nadir_err,
            t_err,
            params,
        )
    return LiteralCheck(agrees, traj_err, nadir_err, t_err, params)
