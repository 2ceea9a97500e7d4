import logging
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from _params import reference_case, sample_cases  # noqa: E402

from sfrnadir import analytic, oracle  # noqa: E402
from sfrnadir.errors import NoDip, Overdamped  # noqa: E402
from sfrnadir.ffr import StepFfr  # noqa: E402
from sfrnadir.model import AggregateSfr, Disturbance  # noqa: E402

# frozen from RK4 runs at dt=1e-4 that agree with the closed form to 1e-13
REF_F_NADIR = 59.2865265703883
REF_T_NADIR = 2.858848485784803

CASES, _ = sample_cases(30, seed=7)


@pytest.fixture(scope="module")
def ref():
    c = reference_case()
    return c, analytic.solve(c.agg, c.step, c.dist)


def test_reference_nadir(ref):
    _, sol = ref
    rep = analytic.nadir_frequency(sol, 60.0, 59.0)
    assert rep.f_nadir == pytest.approx(REF_F_NADIR, abs=1e-9)
    assert rep.t_nadir == pytest.approx(REF_T_NADIR, abs=1e-9)
    assert rep.primary_path
    assert rep.ufls_margin == pytest.approx(rep.f_nadir - 59.0)
    assert rep.max_rocof == pytest.approx(60.0 * 0.1 / 8.0)


def test_starts_at_rest(ref):
    _, sol = ref
    assert analytic.evaluate(sol, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert analytic.governor_output(sol, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_zero_input_is_flat():
    c = reference_case()
    sol = analytic.solve(c.agg, StepFfr(0.0), Disturbance(0.0))
    t = np.linspace(0.0, 30.0, 301)
    assert np.all(analytic.evaluate(sol, t) == 0.0)
    rep = analytic.nadir_frequency(sol, 60.0, 59.0)
    assert rep.f_nadir == 60.0 and rep.t_nadir == 0.0
    with pytest.raises(NoDip):
        analytic.nadir_time(sol)


def test_matches_rk4(ref):
    c, sol = ref
    tr = oracle.integrate(c.agg, c.step, c.dist, dt=1e-3, horizon=30.0)
    assert np.max(np.abs(analytic.evaluate(sol, tr.t) - tr.delta_f)) <= 1e-6
    assert np.max(np.abs(analytic.governor_output(sol, tr.t) - tr.p_m)) <= 1e-6


@pytest.mark.parametrize("case", CASES[:10])
def test_derivatives_match_finite_differences(case):
    sol = analytic.solve(case.agg, case.step, case.dist)
    h = 1e-5
    for t in (0.7, 1.5, 4.0, 11.0):
        fd1 = (analytic.evaluate(sol, t + h) - analytic.evaluate(sol, t - h)) / (2 * h)
        fd2 = (analytic.evaluate_derivative(sol, t + h) - analytic.evaluate_derivative(sol, t - h)) / (2 * h)
        assert analytic.evaluate_derivative(sol, t) == pytest.approx(fd1, abs=1e-8)
        assert analytic.evaluate_second_derivative(sol, t) == pytest.approx(fd2, abs=1e-7)


@pytest.mark.parametrize("case", CASES)
def test_ode_residual_vanishes(case):
    """``2H f' = dP_m + dP_d + P_ffr1 - D f`` with the analytic governor output."""
    sol = analytic.solve(case.agg, case.step, case.dist)
    t = np.linspace(0.0, 20.0, 2001)
    from sfrnadir.ffr import step_power_at

    lhs = 2.0 * case.agg.h_sigma * analytic.evaluate_derivative(sol, t)
    rhs = (
        analytic.governor_output(sol, t)
        + case.dist.delta_p_d
        + step_power_at(case.step, t)
        - case.agg.d_sigma * analytic.evaluate(sol, t)
    )
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@pytest.mark.parametrize("case", CASES)
def test_nadir_is_stationary_minimum(case):
    sol = analytic.solve(case.agg, case.step, case.dist)
    t_n, primary = analytic._locate_nadir(sol)
    assert abs(analytic.evaluate_derivative(sol, t_n)) <= (1e-10 if primary else 1e-9)
    grid = np.linspace(0.0, 60.0, 60001)
    assert analytic.evaluate(sol, t_n) <= np.min(analytic.evaluate(sol, grid)) + 1e-15


def test_nadir_time_does_not_depend_on_disturbance_size():
    c = reference_case()
    zero = StepFfr(0.0)
    t_a = analytic.nadir_time(analytic.solve(c.agg, zero, Disturbance(-0.05)))
    t_b = analytic.nadir_time(analytic.solve(c.agg, zero, Disturbance(-0.1)))
    assert t_a == pytest.approx(t_b, abs=1e-12)


@pytest.mark.parametrize("case", CASES[:10])
def test_response_is_linear(case):
    t = np.linspace(0.0, 30.0, 3001)
    a = analytic.evaluate(analytic.solve(case.agg, case.step, case.dist), t)
    doubled = StepFfr(2 * case.step.p_sus, case.step.t_1, case.step.t_2)
    b = analytic.evaluate(analytic.solve(case.agg, doubled, Disturbance(2 * case.dist.delta_p_d)), t)
    assert np.max(np.abs(b - 2 * a)) <= 1e-12


def test_late_form_amplitude_and_phase(ref):
    """``ss + K M e^{-sigma t} sin(w_d t + alpha)`` reproduces the response after t2."""
    _, sol = ref
    t = np.linspace(sol.step.t_2 + 1e-3, 30.0, 500)
    late = sol.steady_state + sol.late_scale * sol.m_amplitude * np.exp(-sol.chars.sigma * t) * np.sin(
        sol.chars.omega_d * t + sol.alpha
    )
    assert np.max(np.abs(late - analytic.evaluate(sol, t))) <= 1e-14
    assert 0.0 <= sol.alpha < 2 * math.pi


@pytest.mark.parametrize("case", CASES)
def test_corrected_literal_form_agrees(case):
    sol = analytic.solve(case.agg, case.step, case.dist)
    if analytic.nadir_time(sol) <= case.step.t_2:
        pytest.skip("nadir before full step deployment")
    chk = analytic.cross_check_literal(sol, tol=1e-9, corrected=True)
    assert chk.agrees, chk


def test_literal_form_mismatch_is_logged(ref, caplog):
    _, sol = ref
    with caplog.at_level(logging.WARNING, logger="sfrnadir"):
        chk = analytic.cross_check_literal(sol, tol=1e-9)
    assert not chk.agrees
    assert chk.max_trajectory_error > 1e-4
    assert "h_sigma" in caplog.text and "delta_p_d" in caplog.text


def test_literal_and_corrected_gain_coincide_without_lead():
    agg = AggregateSfr(4.0, 1.0, 0.05, 0.0, 10.0)
    step, dist = StepFfr(0.0), Disturbance(-0.1)
    lit = analytic.literal_coefficients(agg, step, dist)
    cor = analytic.literal_coefficients(agg, step, dist, corrected=True)
    # no step FFR: ramp phases drop out, only the radical differs
    assert lit.radical != cor.radical
    sol = analytic.solve(agg, step, dist)
    assert cor.delta_f_nadir == pytest.approx(analytic.evaluate(sol, analytic.nadir_time(sol)), abs=1e-12)


def test_modal_terms_describe_trajectory(ref):
    _, sol = ref
    t = np.linspace(0.0, 20.0, 401)
    total = np.zeros_like(t)
    for m in sol.modal_terms:
        tau = t - m.delay
        on = tau >= 0
        tau = np.where(on, tau, 0.0)
        val = m.const + m.slope * tau + m.amplitude * np.exp(-sol.chars.sigma * tau) * np.sin(sol.chars.omega_d * tau + m.phase)
        total += np.where(on, val, 0.0)
    np.testing.assert_allclose(total, analytic.evaluate(sol, t), atol=1e-14)


def test_guard_band_refuses_near_critical():
    from scipy.optimize import brentq

    from sfrnadir.model import CRITICAL_GUARD_BAND, characteristics

    def zeta(d):
        h, r, t1, tg = 4.0, 0.05, 0.3, 10.0
        return 0.5 * ((d + t1 / tg / r) / (2 * h) + 1 / tg) * math.sqrt(2 * tg * h / (d + 1 / r))

    d = brentq(lambda x: zeta(x) - (1.0 - 0.5 * CRITICAL_GUARD_BAND), 0.0, 200.0)
    agg = AggregateSfr(4.0, d, 0.05, 0.3, 10.0)
    assert 1.0 - characteristics(agg).zeta < CRITICAL_GUARD_BAND
    with pytest.raises(Overdamped):
        analytic.solve(agg, StepFfr(), Disturbance(-0.1))


def test_rocof_includes_initial_jump(ref):
    c, sol = ref
    assert analytic.max_rocof(sol, 5.0) >= abs(c.dist.delta_p_d) / (2 * c.agg.h_sigma)
    rep = analytic.nadir_frequency(sol, 60.0, rocof=False)
    assert math.isnan(rep.max_rocof)


def test_scalar_and_vector_paths_agree(ref):
    _, sol = ref
    t = np.linspace(0.0, 10.0, 101)
    vec = analytic.evaluate_derivative(sol, t)
    sca = np.array([analytic.evaluate_derivative(sol, float(x)) for x in t])
    np.testing.assert_allclose(vec, sca, rtol=0, atol=1e-15)


def test_steady_state_shrinks_with_damping():
    c = reference_case()
    ss = [
        abs(analytic.solve(AggregateSfr(4.0, d, 0.05, 0.3, 10.0), c.step, c.dist).steady_state)
        for d in (0.5, 1.0, 2.0, 4.0, 8.0)
    ]
    assert all(a > b for a, b in zip(ss, ss[1:]))


def test_early_nadir_uses_fallback_and_warns(caplog):
    """A slow step response can put the nadir before full deployment."""
    agg = AggregateSfr(2.0, 1.0, 0.05, 0.0, 2.0)
    step = StepFfr(0.3, 0.05, 20.0)
    sol = analytic.solve(agg, step, Disturbance(-0.1))
    with caplog.at_level(logging.WARNING, logger="sfrnadir"):
        rep = analytic.nadir_frequency(sol, 60.0, literal=False)
    assert rep.t_nadir < step.t_2
    assert rep.primary_path is False
    assert "precedes full step-FFR deployment" in caplog.text
    grid = np.linspace(0.0, 60.0, 60001)
    assert analytic.evaluate(sol, rep.t_nadir) <= np.min(analytic.evaluate(sol, grid)) + 1e-15
