"""Compare the numba-compiled RK4 kernel with its pure-Python fallback.

Usage: python3 benchmarks/bench_rk4_kernel.py [--horizon 6] [--repeat 3]

Both variants integrate the same reference system on the same grid; the
script reports wall time per run, steps per second and the largest
difference between the two trajectories.
"""

import argparse
import time

import numpy as np

from sfrnadir import oracle
from sfrnadir.ffr import StepFfr
from sfrnadir.model import AggregateSfr, Disturbance

AGG = AggregateSfr(4.0, 1.0, 0.05, 0.3, 10.0)
STEP = StepFfr(0.04, 0.05, 0.35)
DIST = Disturbance(-0.1)


def timed(use_numba, dt, horizon, repeat):
    best, tr = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = oracle.integrate(AGG, STEP, DIST, dt=dt, horizon=horizon, use_numba=use_numba)
        best = min(best, time.perf_counter() - t0)
    return best, tr


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=1e-4)
    ap.add_argument("--horizon", type=float, default=6.0, help="simulated seconds per run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if oracle.RK4_KERNELS[1] is None:
        raise SystemExit("numba is not installed; nothing to compare")

    # compile outside the timed runs
    oracle.integrate(AGG, STEP, DIST, dt=args.dt, horizon=10 * args.dt, use_numba=True)
    steps = int(round(args.horizon / args.dt))
    t_nb, tr_nb = timed(True, args.dt, args.horizon, args.repeat)
    t_py, tr_py = timed(False, args.dt, args.horizon, args.repeat)
    diff = float(np.max(np.abs(tr_nb.delta_f - tr_py.delta_f)))
    print(f"{steps} RK4 steps (dt={args.dt:g} s, horizon={args.horizon:g} s), best of {args.repeat}")
    print(f"  numba : {1e3 * t_nb:9.2f} ms  {steps / t_nb:12.3e} steps/s")
    print(f"  python: {1e3 * t_py:9.2f} ms  {steps / t_py:12.3e} steps/s")
    print(f"  speed-up {t_py / t_nb:.1f}x, max |difference| {diff:.2e} p.u.")


if __name__ == "__main__":
    main()
