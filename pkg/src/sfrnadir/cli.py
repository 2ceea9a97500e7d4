"""Command-line front end: ``sfrnadir {predict,trace,sweep,bench}``.

Exit codes: 0 success, 1 input error, 2 closed form inapplicable (model
regime), 3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic, oracle
from .errors import InputError, RegimeError, SfrError
from .scenario import (
    AGREEMENT_TOL_HZ,
    SCHEMA_VERSION,
    Solver,
    load_scenario,
    load_sweep,
    predict_one,
    sweep_row,
)

EXIT_OK, EXIT_INPUT, EXIT_REGIME, EXIT_INTERNAL = 0, 1, 2, 3

TRACE_COLUMNS = (
    "t", "delta_f_pu", "f_hz", "p_m", "p_ffr1", "p_ffr2", "p_ffr3",
    "delta_f_analytic_pu", "f_analytic_hz", "p_m_analytic",
)  # fmt: skip
SWEEP_COLUMNS = ("value", "f_nadir_hz", "t_nadir_s", "ufls_margin_hz", "status")
THREADS_ENV = "SFRNADIR_THREADS"

log = logging.getLogger("sfrnadir")


def _override(sc, args):
    import dataclasses

    changes = {}
    if getattr(args, "solver", None):
        changes["solver"] = Solver(args.solver)
    if getattr(args, "dt", None) is not None:
        changes["oracle_dt"] = args.dt
    if getattr(args, "horizon", None) is not None:
        changes["horizon"] = args.horizon
    return dataclasses.replace(sc, **changes) if changes else sc


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _write_text(path: Path, text: str):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot write ({exc.strerror})") from exc


def _aggregate_doc(agg) -> dict:
    from dataclasses import asdict

    return asdict(agg)


def cmd_predict(args) -> int:
    sc = _override(load_scenario(args.scenario), args)
    agg, step = sc.aggregate(), sc.step_ffr()
    try:
        ch = analytic.characteristics(agg)
        chars = {"zeta": ch.zeta, "omega_n": ch.omega_n, "omega_d": ch.omega_d, "phi": ch.phi}
    except RegimeError:
        chars = None

    if sc.solver is not Solver.ORACLE:
        # keep one-off kernel loading out of the reported timings
        analytic.warm_up()
    results, timing = [], {}
    breach = []
    for dist in sc.disturbances:
        try:
            pred = predict_one(agg, step, dist, sc.f_n, sc.ufls_threshold, sc.solver, sc.oracle_dt, sc.horizon)
        except RegimeError as exc:
            print(f"error: {dist.label}: {exc}; rerun with --solver oracle", file=sys.stderr)
            return EXIT_REGIME
        gap = pred.agreement_hz()
        if gap is not None and not gap <= AGREEMENT_TOL_HZ:
            breach.append(f"{dist.label}: analytic and oracle nadirs differ by {gap:.3g} Hz")
        results.append(pred.to_dict(sc.f_n, sc.ufls_threshold))
        timing[dist.label] = {k: v for k, v in sorted(pred.timing_ms.items())}

        rep = pred.best
        verdict = "PASS" if pred.ufls_pass(sc.f_n, sc.ufls_threshold) else "FAIL"
        if pred.no_dip:
            _say(args, f"{dist.label}: no frequency dip; UFLS {verdict}")
        else:
            line = (
                f"{dist.label}: f_nadir={rep.f_nadir:.6f} Hz at t={rep.t_nadir:.4f} s "
                f"[{rep.method.value.lower()}], margin={rep.ufls_margin:+.4f} Hz, UFLS {verdict}"
            )
            if gap is not None:
                line += f", |analytic-oracle|={gap:.2e} Hz"
            if "analytic" in pred.timing_ms:
                line += f", predicted in {pred.timing_ms['analytic']:.3f} ms"
            _say(args, line)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "inputs": sc.to_document(),
        "aggregate": _aggregate_doc(agg),
        "step_ffr": {"p_sus": step.p_sus, "t_1": step.t_1, "t_2": step.t_2},
        "characteristics": chars,
        "results": results,
        "timing_ms": timing,
    }
    if args.out:
        _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if breach:
        for b in breach:
            print(f"invariant breach: {b}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def trace_table(sc, index: int = 0) -> np.ndarray:
    """Oracle trajectory plus analytic columns for one disturbance (NaN when inapplicable)."""
    agg, step = sc.aggregate(), sc.step_ffr()
    dist = sc.disturbances[index]
    traj = oracle.integrate(agg, step, dist, dt=sc.oracle_dt, horizon=sc.horizon)
    try:
        sol = analytic.solve(agg, step, dist)
        df_a = analytic.evaluate(sol, traj.t)
        pm_a = analytic.governor_output(sol, traj.t)
    except RegimeError:
        df_a = pm_a = np.full_like(traj.t, math.nan)
    return np.column_stack(
        [
            traj.t, traj.delta_f, sc.f_n * (1.0 + traj.delta_f), traj.p_m,
            traj.p_ffr1, traj.p_ffr2, traj.p_ffr3,
            df_a, sc.f_n * (1.0 + df_a), pm_a,
        ]
    )  # fmt: skip


def cmd_trace(args) -> int:
    sc = _override(load_scenario(args.scenario), args)
    if not 0 <= args.disturbance < len(sc.disturbances):
        raise InputError(f"--disturbance: index {args.disturbance} out of range")
    table = trace_table(sc, args.disturbance)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            np.savetxt(fh, table, fmt="%.16e", delimiter=",")
    except OSError as exc:
        raise InputError(f"{args.out}: cannot write ({exc.strerror})") from exc
    gap = float(np.nanmax(np.abs(table[:, 1] - table[:, 7]))) if not np.isnan(table[0, 7]) else math.nan
    _say(args, f"wrote {len(table)} rows to {args.out}; max |analytic-oracle| = {gap:.3e} p.u.")
    return EXIT_OK


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise InputError(f"{THREADS_ENV}: expected an integer, got {raw!r}") from None
    return max(1, n)


def cmd_sweep(args) -> int:
    spec = load_sweep(args.spec)
    values = spec.values()
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda v: sweep_row(spec, v), values))
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    except OSError as exc:
        raise InputError(f"{args.out}: cannot write ({exc.strerror})") from exc
    _say(args, f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def bench(sc, iterations: int, index: int = 0) -> dict:
    """Latency of the analytic nadir against one oracle run on the same disturbance.

    The analytic timing covers solve, nadir location and nadir frequency; the
    RoCoF scan and the literal cross-check are left out.
    """
    if iterations < 100:
        raise InputError(f"--iterations: must be >= 100, got {iterations}")
    agg, step = sc.aggregate(), sc.step_ffr()
    dist = sc.disturbances[index]
    analytic.warm_up()
    samples = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        sol = analytic.solve(agg, step, dist)
        analytic.nadir_frequency(sol, sc.f_n, sc.ufls_threshold, literal=False, rocof=False)
        samples.append(time.perf_counter() - t0)
    # compile outside the timed run
    oracle.integrate(agg, step, dist, dt=sc.oracle_dt, horizon=10 * sc.oracle_dt)
    t0 = time.perf_counter()
    traj = oracle.integrate(agg, step, dist, dt=sc.oracle_dt, horizon=sc.horizon)
    oracle.extract_nadir(traj, sc.f_n, sc.ufls_threshold)
    oracle_s = time.perf_counter() - t0
    ordered = sorted(samples)
    median = statistics.median(samples)
    return {
        "iterations": iterations,
        "samples_s": samples,
        "median_ms": 1e3 * median,
        "p99_ms": 1e3 * ordered[min(len(ordered) - 1, math.ceil(0.99 * len(ordered)) - 1)],
        "oracle_ms": 1e3 * oracle_s,
        "oracle_dt": sc.oracle_dt,
        "oracle_horizon": sc.horizon,
        "speedup": oracle_s / median,
    }


def cmd_bench(args) -> int:
    sc = _override(load_scenario(args.scenario), args)
    res = bench(sc, args.iterations, args.disturbance)
    _say(
        args,
        f"analytic nadir: median {res['median_ms']:.4f} ms, p99 {res['p99_ms']:.4f} ms "
        f"over {res['iterations']} runs\n"
        f"oracle (dt={res['oracle_dt']:g} s, horizon={res['oracle_horizon']:g} s): {res['oracle_ms']:.1f} ms\n"
        f"speed-up: {res['speedup']:.3g}x",
    )
    if args.out:
        out = {k: v for k, v in res.items() if k != "samples_s"}
        _write_text(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfrnadir", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress human-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--solver", choices=[s.value for s in Solver])
        p.add_argument("--dt", type=float, help="oracle RK4 step, s")
        p.add_argument("--horizon", type=float, help="oracle horizon, s")

    p = sub.add_parser("predict", help="nadir report per disturbance")
    p.add_argument("scenario", type=Path)
    p.add_argument("--out", type=Path, help="write the JSON report here")
    solver_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("trace", help="write analytic and oracle trajectories as CSV")
    p.add_argument("scenario", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--disturbance", type=int, default=0, help="index into the scenario's disturbances")
    solver_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("sweep", help="nadir versus one parameter, as CSV")
    p.add_argument("spec", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="analytic prediction latency and speed-up over the oracle")
    p.add_argument("scenario", type=Path)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--disturbance", type=int, default=0)
    p.add_argument("--out", type=Path, help="write summary JSON here")
    solver_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # accept --quiet after the subcommand as well
    argv = list(sys.argv[1:] if argv is None else argv)
    quiet = "--quiet" in argv
    argv = [a for a in argv if a != "--quiet"]
    args = parser.parse_args(argv)
    args.quiet = quiet
    logging.basicConfig(level=logging.ERROR if quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RegimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except SfrError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
