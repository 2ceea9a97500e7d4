"""Scenario and sweep documents, plus the per-disturbance prediction workflow.

Documents are YAML (JSON is accepted too, being a YAML subset). The
structural schema lives in ``schema/scenario.schema.json`` and
``schema/sweep.schema.json``; semantic bounds are enforced by the domain
dataclasses. Every violation is reported as an :class:`InputError` whose
message starts with the offending field path.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np
import yaml

from . import analytic, oracle
from .errors import InputError, NoDip, RegimeError, SfrError
from .ffr import DerivativeFfr, ProportionalFfr, StepFfr
from .model import (
    AggregateSfr,
    Disturbance,
    FfrPortfolio,
    SgParams,
    UnitRecord,
    aggregate_fleet,
    collect_step_ffr,
)

SCHEMA_VERSION = 1
# analytic and oracle nadirs must agree this closely, Hz
AGREEMENT_TOL_HZ = 1e-4


class Solver(str, enum.Enum):
    ANALYTIC = "analytic"
    ORACLE = "oracle"
    BOTH = "both"


class SweepParameter(str, enum.Enum):
    DELTA_P_D = "delta_p_d"
    P_SUS = "p_sus"
    R_IBR = "r_ibr"
    H_IBR = "h_ibr"
    T_2 = "t_2"


def _schema(name: str) -> dict:
    return json.loads(resources.files("sfrnadir").joinpath("schema").joinpath(name).read_text())


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<document>"


def _validate(doc: Any, schema_name: str, source: str):
    validator = jsonschema.Draft202012Validator(_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{source}: {_path(e.absolute_path)}: {e.message}" for e in errors]
        raise InputError("\n".join(lines))


def _load_document(path: Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: not valid YAML: {exc}") from exc


def _build(where: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except InputError as exc:
        raise InputError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class Scenario:
    fleet: tuple[UnitRecord, ...]
    s_base: float
    f_n: float
    disturbances: tuple[Disturbance, ...]
    ufls_threshold: float
    solver: Solver = Solver.BOTH
    oracle_dt: float = oracle.DEFAULT_DT
    horizon: float = oracle.DEFAULT_HORIZON
    source: str = field(default="<memory>", compare=False)

    def __post_init__(self):
        if not self.disturbances:
            raise InputError("disturbances: at least one disturbance is required")
        if not self.ufls_threshold < self.f_n:
            raise InputError(
                f"ufls_threshold: {self.ufls_threshold} Hz must be below f_n={self.f_n} Hz"
            )

    def aggregate(self) -> AggregateSfr:
        return aggregate_fleet(self.fleet, self.s_base, self.f_n)

    def step_ffr(self) -> StepFfr:
        return collect_step_ffr(self.fleet, self.s_base)

    def to_document(self) -> dict:
        """Inverse of :func:`scenario_from_document` (used for echoing inputs)."""

        def unit(u: UnitRecord):
            d = {"id": u.id, "kind": u.kind.value, "rating": u.rating}
            if u.sg_params is not None:
                d["sg_params"] = dataclasses.asdict(u.sg_params)
            if u.ffr is not None:
                d["ffr"] = {k: dataclasses.asdict(v) for k, v in vars(u.ffr).items() if v is not None}
            return d

        return {
            "schema_version": SCHEMA_VERSION,
            "s_base": self.s_base,
            "f_n": self.f_n,
            "ufls_threshold": self.ufls_threshold,
            "solver": self.solver.value,
            "oracle_dt": self.oracle_dt,
            "horizon": self.horizon,
            "fleet": [unit(u) for u in self.fleet],
            "disturbances": [{"label": d.label, "delta_p_d": d.delta_p_d} for d in self.disturbances],
        }


def scenario_from_document(doc: Any, source: str = "<document>") -> Scenario:
    _validate(doc, "scenario.schema.json", source)
    units = []
    ids = set()
    for i, u in enumerate(doc["fleet"]):
        where = f"{source}: fleet[{i}]"
        if u["id"] in ids:
            raise InputError(f"{where}.id: duplicate unit id {u['id']!r}")
        ids.add(u["id"])
        sg = _build(f"{where}.sg_params", SgParams, **u["sg_params"]) if "sg_params" in u else None
        ffr = None
        if "ffr" in u:
            f = u["ffr"]
            parts = {}
            for key, cls in (("step", StepFfr), ("proportional", ProportionalFfr), ("derivative", DerivativeFfr)):
                if key in f:
                    parts[key] = _build(f"{where}.ffr.{key}", cls, **f[key])
            ffr = _build(f"{where}.ffr", FfrPortfolio, **parts)
        units.append(_build(where, UnitRecord, id=u["id"], kind=u["kind"], rating=u["rating"], sg_params=sg, ffr=ffr))
    dists = tuple(
        _build(f"{source}: disturbances[{i}]", Disturbance, delta_p_d=d["delta_p_d"], label=d.get("label", f"d{i}"))
        for i, d in enumerate(doc["disturbances"])
    )
    kwargs = {}
    if "oracle_dt" in doc:
        kwargs["oracle_dt"] = doc["oracle_dt"]
    if "horizon" in doc:
        kwargs["horizon"] = doc["horizon"]
    sc = _build(
        source,
        Scenario,
        fleet=tuple(units),
        s_base=doc["s_base"],
        f_n=doc["f_n"],
        disturbances=dists,
        ufls_threshold=doc["ufls_threshold"],
        solver=Solver(doc.get("solver", "both")),
        source=source,
        **kwargs,
    )
    # surface aggregation errors (no SG, mixed step timing) as input errors now
    _build(source, sc.aggregate)
    _build(source, sc.step_ffr)
    return sc


def load_scenario(path) -> Scenario:
    return scenario_from_document(_load_document(Path(path)), str(path))


@dataclass(frozen=True)
class SweepSpec:
    parameter: SweepParameter
    start: float
    stop: float
    count: int
    base_scenario: Scenario
    disturbance: int = 0

    def __post_init__(self):
        if self.count < 2:
            raise InputError(f"range.count: must be >= 2, got {self.count}")
        if self.start == self.stop:
            raise InputError("range: start and stop must differ")
        if not 0 <= self.disturbance < len(self.base_scenario.disturbances):
            raise InputError(f"disturbance: index {self.disturbance} out of range")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    doc = _load_document(path)
    _validate(doc, "sweep.schema.json", str(path))
    base_path = Path(doc["base_scenario"])
    if not base_path.is_absolute():
        base_path = path.parent / base_path
    base = load_scenario(base_path)
    rng = doc["range"]
    return _build(
        str(path),
        SweepSpec,
        parameter=SweepParameter(doc["parameter"]),
        start=rng["start"],
        stop=rng["stop"],
        count=rng["count"],
        base_scenario=base,
        disturbance=doc.get("disturbance", 0),
    )


# ---------------------------------------------------------------------------
# workflow


def report_dict(rep: analytic.NadirReport) -> dict:
    d = dataclasses.asdict(rep)
    d["method"] = rep.method.value
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


@dataclass
class Prediction:
    """Outcome for one disturbance; ``timing`` is kept apart from the results."""

    label: str
    delta_p_d: float
    analytic: Optional[analytic.NadirReport] = None
    oracle: Optional[analytic.NadirReport] = None
    no_dip: bool = False
    regime: Optional[str] = None
    literal_agrees: Optional[bool] = None
    timing_ms: dict = field(default_factory=dict)

    @property
    def best(self) -> Optional[analytic.NadirReport]:
        return self.analytic or self.oracle

    def agreement_hz(self) -> Optional[float]:
        if self.analytic is None or self.oracle is None:
            return None
        return abs(self.analytic.f_nadir - self.oracle.f_nadir)

    def ufls_pass(self, f_n: float, threshold: float) -> bool:
        f = f_n if self.no_dip or self.best is None else self.best.f_nadir
        return f > threshold

    def to_dict(self, f_n: float, threshold: float) -> dict:
        return {
            "label": self.label,
            "delta_p_d": self.delta_p_d,
            "no_dip": self.no_dip,
            "regime": self.regime,
            "analytic": None if self.analytic is None else report_dict(self.analytic),
            "oracle": None if self.oracle is None else report_dict(self.oracle),
            "agreement_hz": self.agreement_hz(),
            "literal_formula_agrees": self.literal_agrees,
            "ufls_pass": self.ufls_pass(f_n, threshold),
        }


def _no_dip_report(f_n, threshold, method, ss=0.0) -> analytic.NadirReport:
    return analytic.NadirReport(
        f_nadir=f_n, t_nadir=0.0, delta_f_ss=ss, max_rocof=0.0, ufls_margin=f_n - threshold, method=method
    )


def predict_one(
    agg: AggregateSfr,
    step: StepFfr,
    dist: Disturbance,
    f_n: float,
    threshold: float,
    solver: Solver,
    dt: float = oracle.DEFAULT_DT,
    horizon: float = oracle.DEFAULT_HORIZON,
    literal_check: bool = True,
) -> Prediction:
    """Analytic prediction with optional oracle cross-check for one disturbance.

    ``literal_check`` also evaluates the literal late-time formulas and
    records whether they agree with the residue solution.

    :class:`RegimeError` propagates when ``solver`` is analytic-only and the
    closed form does not apply; with ``both`` the oracle takes over.
    """
    pred = Prediction(label=dist.label, delta_p_d=dist.delta_p_d)
    run_oracle = solver is not Solver.ANALYTIC
    if solver is not Solver.ORACLE:
        try:
            t0 = time.perf_counter()
            sol = analytic.solve(agg, step, dist)
            try:
                rep = analytic.nadir_frequency(sol, f_n, threshold, literal=False)
                pred.timing_ms["analytic"] = 1e3 * (time.perf_counter() - t0)
                pred.analytic = rep
                if literal_check and sol.m_amplitude > 0.0 and rep.t_nadir > step.t_2:
                    pred.literal_agrees = analytic.cross_check_literal(sol).agrees
                    lit = analytic.literal_coefficients(agg, step, dist)
                    pred.analytic = dataclasses.replace(
                        rep, literal_delta_f_nadir=lit.delta_f_nadir, literal_t_nadir=lit.t_nadir
                    )
            except NoDip:
                pred.timing_ms["analytic"] = 1e3 * (time.perf_counter() - t0)
                pred.no_dip = True
                pred.analytic = _no_dip_report(f_n, threshold, analytic.Method.ANALYTIC, sol.steady_state)
        except RegimeError as exc:
            pred.regime = str(exc)
            if solver is Solver.ANALYTIC:
                raise
            run_oracle = True
    if run_oracle:
        t0 = time.perf_counter()
        traj = oracle.integrate(agg, step, dist, dt=dt, horizon=horizon)
        ss = (step.p_sus + dist.delta_p_d) / agg.stiffness
        try:
            pred.oracle = oracle.extract_nadir(traj, f_n, threshold, delta_f_ss=ss)
        except NoDip:
            pred.no_dip = True
            pred.oracle = _no_dip_report(f_n, threshold, analytic.Method.ORACLE, ss)
        pred.timing_ms["oracle"] = 1e3 * (time.perf_counter() - t0)
    return pred


def with_parameter(sc: Scenario, param: SweepParameter, value: float, dist_index: int = 0):
    """``(aggregate, step, disturbance)`` of ``sc`` with one parameter replaced."""
    dist = sc.disturbances[dist_index]
    fleet = sc.fleet
    if param in (SweepParameter.R_IBR, SweepParameter.H_IBR):
        member = "proportional" if param is SweepParameter.R_IBR else "derivative"
        cls = ProportionalFfr if param is SweepParameter.R_IBR else DerivativeFfr
        new, hit = [], False
        for u in fleet:
            if u.ffr is not None and getattr(u.ffr, member) is not None:
                hit = True
                u = dataclasses.replace(u, ffr=dataclasses.replace(u.ffr, **{member: cls(value)}))
            new.append(u)
        if not hit:
            raise InputError(f"parameter {param.value}: no unit carries {member} FFR")
        fleet = tuple(new)
    agg = aggregate_fleet(fleet, sc.s_base, sc.f_n)
    step = collect_step_ffr(fleet, sc.s_base)
    if param is SweepParameter.DELTA_P_D:
        dist = Disturbance(value, dist.label)
    elif param is SweepParameter.P_SUS:
        step = StepFfr(value, step.t_1, step.t_2)
    elif param is SweepParameter.T_2:
        step = StepFfr(step.p_sus, step.t_1, value)
    return agg, step, dist


def sweep_row(spec: SweepSpec, value: float) -> dict:
    sc = spec.base_scenario
    row = {"value": float(value), "f_nadir_hz": math.nan, "t_nadir_s": math.nan, "ufls_margin_hz": math.nan}
    solver = Solver.ORACLE if sc.solver is Solver.ORACLE else Solver.ANALYTIC
    try:
        agg, step, dist = with_parameter(sc, spec.parameter, float(value), spec.disturbance)
        pred = predict_one(
            agg, step, dist, sc.f_n, sc.ufls_threshold, solver, sc.oracle_dt, sc.horizon, literal_check=False
        )
    except RegimeError:
        if sc.solver is Solver.ANALYTIC:
            row["status"] = "overdamped"
            return row
        pred = predict_one(
            agg, step, dist, sc.f_n, sc.ufls_threshold, Solver.ORACLE, sc.oracle_dt, sc.horizon, literal_check=False
        )
    except SfrError as exc:
        row["status"] = f"error:{type(exc).__name__}"
        return row
    rep = pred.best
    row.update(f_nadir_hz=rep.f_nadir, t_nadir_s=rep.t_nadir, ufls_margin_hz=rep.ufls_margin)
    row["status"] = "no-dip" if pred.no_dip else ("ok" if pred.analytic is not None else "ok-oracle")
    return row
