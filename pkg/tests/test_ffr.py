import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfrnadir.errors import InputError, NonPositiveParameter
from sfrnadir.ffr import (
    DerivativeFfr,
    ProportionalFfr,
    StepFfr,
    decompose_input,
    derivative_power,
    proportional_power,
    step_power_at,
)
from sfrnadir.model import Disturbance

STEP = StepFfr(0.1, 0.05, 0.35)


@pytest.mark.parametrize(
    "t, expected",
    [(0.0, 0.0), (0.05, 0.0), (0.2, 0.05), (0.35, 0.1), (1.0, 0.1), (-1.0, 0.0)],
)
def test_step_power_values(t, expected):
    assert step_power_at(STEP, t) == pytest.approx(expected, abs=1e-15)


def test_step_power_vectorised():
    t = np.array([0.0, 0.2, 5.0])
    np.testing.assert_allclose(step_power_at(STEP, t), [0.0, 0.05, 0.1], atol=1e-15)


def test_ramp_rate():
    assert STEP.ramp_rate == pytest.approx(0.1 / 0.3)


def test_invalid_step():
    with pytest.raises(NonPositiveParameter):
        StepFfr(-0.1)
    with pytest.raises(InputError):
        StepFfr(0.1, 0.3, 0.3)
    with pytest.raises(NonPositiveParameter):
        ProportionalFfr(0.0)
    with pytest.raises(NonPositiveParameter):
        DerivativeFfr(-1.0)


def test_decomposition_matches_total_input():
    dist = Disturbance(-0.12)
    dec = decompose_input(STEP, dist)
    t = np.linspace(0.0, 2.0, 20001)
    np.testing.assert_allclose(dec.value_at(t), step_power_at(STEP, t) + dist.delta_p_d, rtol=0, atol=1e-15)
    assert len(dec.step_terms) == 1 and len(dec.ramp_terms) == 2


def test_proportional_and_derivative_signs():
    assert proportional_power(0.05, 0.01) == pytest.approx(-0.2)
    np.testing.assert_allclose(proportional_power(0.05, np.array([-0.01, 0.02])), [0.2, -0.4])
    assert derivative_power(4.0, -0.1) == pytest.approx(0.8)
    np.testing.assert_allclose(derivative_power(2.0, np.array([0.5])), [-2.0])


times = st.floats(min_value=-1.0, max_value=5.0, allow_nan=False)
steps = st.builds(
    lambda p, a, w: StepFfr(p, a, a + w),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.01, 1.0),
)


@settings(max_examples=200, deadline=None)
@given(steps, times, times)
def test_step_power_is_monotone_and_bounded(step, a, b):
    lo, hi = sorted((a, b))
    p_lo, p_hi = step_power_at(step, lo), step_power_at(step, hi)
    assert 0.0 <= p_lo <= p_hi + 1e-15
    assert p_hi <= step.p_sus + 1e-15


@settings(max_examples=200, deadline=None)
@given(steps)
def test_step_power_is_continuous_at_breakpoints(step):
    for tb in (step.t_1, step.t_2):
        left, right = step_power_at(step, np.nextafter(tb, -np.inf)), step_power_at(step, np.nextafter(tb, np.inf))
        assert abs(right - left) <= 1e-9 * max(1.0, step.ramp_rate)


@settings(max_examples=100, deadline=None)
@given(steps, st.floats(-0.5, 0.0))
def test_decomposition_property(step, dpd):
    dec = decompose_input(step, Disturbance(dpd))
    t = np.linspace(0.0, 2.0, 401)
    np.testing.assert_allclose(dec.value_at(t), step_power_at(step, t) + dpd, rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.001, 1.0), st.floats(-1.0, 1.0).filter(lambda x: x != 0.0))
def test_droop_opposes_deviation(r, df):
    assert np.sign(proportional_power(r, df)) == -np.sign(df)
