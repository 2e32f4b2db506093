#!/usr/bin/env python3
"""Timing comparison of the numba kernels against the pure NumPy fallback.

Runs the same ASEP workload under both backends (the fallback in a
subprocess, since the backend is fixed at import) and reports events/second.

    python3 benchmarks/benchmark_backends.py [--labels N] [--tmax T]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import sepgeo
from sepgeo.engine import ClockRecord, evolve
from sepgeo.models import build_rate_model, initial_condition

labels, t_max, trials = json.loads(sys.argv[1])
model = build_rate_model("asep", p=0.75)
init = initial_condition("flat", rho=0.5, labels=range(labels))
# compile / warm up
evolve(model, init, ClockRecord.counter(0), min(t_max, 2.0), checkpoints=[min(t_max, 2.0)])
events = 0
t0 = time.perf_counter()
for k in range(trials):
    run = evolve(model, init, ClockRecord.counter(k + 1), t_max, checkpoints=[t_max])
    events += run.n_events
dt = time.perf_counter() - t0
print(json.dumps({"backend": sepgeo.BACKEND, "events": events, "seconds": dt}))
"""


def run_backend(backend: str, labels: int, t_max: float, trials: int) -> dict:
    env = dict(os.environ, SEPGEO_BACKEND=backend)
    args = json.dumps([labels, t_max, trials])
    res = subprocess.run([sys.executable, "-c", WORKER, args], env=env,
                         capture_output=True, text=True)
    if res.returncode != 0:
        raise RuntimeError(res.stderr[-2000:])
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--labels", type=int, default=400)
    ap.add_argument("--tmax", type=float, default=50.0)
    ap.add_argument("--numba-trials", type=int, default=200)
    ap.add_argument("--numpy-trials", type=int, default=2)
    args = ap.parse_args()

    rows = []
    for backend, trials in (("numba", args.numba_trials), ("numpy", args.numpy_trials)):
        out = run_backend(backend, args.labels, args.tmax, trials)
        rate = out["events"] / out["seconds"]
        rows.append((out["backend"], trials, out["events"], out["seconds"], rate))

    print(f"\nASEP p=3/4, {args.labels} labels, t_max={args.tmax}")
    print(f"{'backend':>8} {'trials':>7} {'events':>10} {'seconds':>9} {'events/s':>12}")
    for backend, trials, events, secs, rate in rows:
        print(f"{backend:>8} {trials:>7} {events:>10} {secs:>9.2f} {rate:>12.3g}")
    if len(rows) == 2 and rows[1][4] > 0:
        print(f"\nspeedup (numba/numpy): {rows[0][4] / rows[1][4]:.0f}x")


if __name__ == "__main__":
    main()
