"""Analytic frequency-nadir prediction for SFR models with inverter fast frequency response."""

from .analytic import (
    ClosedFormSolution,
    NadirReport,
    cross_check_literal,
    evaluate,
    evaluate_derivative,
    literal_coefficients,
    nadir_frequency,
    nadir_time,
    solve,
)
from .errors import InputError, NoDip, Overdamped, RegimeError, SfrError
from .ffr import DerivativeFfr, ProportionalFfr, StepFfr, decompose_input, step_power_at
from .model import (
    AggregateSfr,
    Disturbance,
    FfrPortfolio,
    SgParams,
    UnitRecord,
    aggregate_fleet,
    characteristics,
    collect_step_ffr,
)
from .oracle import extract_nadir, integrate

__version__ = "0.1.0"
