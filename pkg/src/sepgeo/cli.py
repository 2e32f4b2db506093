"""Command-line interface.

Subcommands: ``simulate`` (Monte Carlo experiments), ``refdist`` (reference
distribution tables), ``analyze`` (statistics reports from raw samples).
Exit codes: 0 success, 2 configuration error, 3 contamination abort.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .harness import (
    ConfigError,
    ContaminationAbort,
    ExperimentConfig,
    analyze,
    run_experiment,
)


def _parse_grid(spec: str, default):
    if spec is None:
        return default
    lo, hi, step = (float(x) for x in spec.split(":"))
    return lo, hi, step


def _float_or_inf(s: str) -> float:
    return math.inf if s.lower() in ("inf", "infinity") else float(s)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sepgeo")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--config", help="JSON config file; flags override it")
    sim.add_argument("--model", choices=("tasep", "asep", "asepsc"))
    sim.add_argument("--p", type=float)
    sim.add_argument("--beta", type=float)
    sim.add_argument("--E", type=_float_or_inf)
    sim.add_argument("--rho", type=float)
    sim.add_argument("--tmax", type=float)
    sim.add_argument("--nmax", type=int)
    sim.add_argument("--target", type=int)
    sim.add_argument("--trials", type=int)
    sim.add_argument("--checkpoints", help="comma-separated times")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--record", help="comma list of endpoint,discrepancy,position,varmin")
    sim.add_argument("--out")
    sim.add_argument("--cushion", type=float)
    sim.add_argument("--loose-window", action="store_true")
    sim.add_argument("--workers", type=int)
    sim.add_argument("--chunk-size", type=int)
    sim.add_argument("--quiet", action="store_true")

    ref = sub.add_parser("refdist", help="write reference distribution tables")
    ref.add_argument("law", choices=("goe", "argmax"))
    ref.add_argument("--grid", help="lo:hi:step")
    ref.add_argument("--mgrid", help="lo:hi:step (argmax maximum-value grid)")
    ref.add_argument("--order", type=int, default=96)
    ref.add_argument("--out", required=True)

    ana = sub.add_parser("analyze", help="aggregate raw samples into a report")
    ana.add_argument("--in", dest="in_dir", required=True)
    ana.add_argument("--ref", dest="ref_dir")
    ana.add_argument("--out", dest="out_dir", required=True)
    ana.add_argument("--recheck", action="store_true")
    ana.add_argument("--quiet", action="store_true")
    return ap


_CONFIG_KEYS = {
    "model": "kind", "p": "p", "beta": "beta", "E": "E", "rho": "rho",
    "tmax": "t_max", "nmax": "n_max", "target": "target", "trials": "trials",
    "checkpoints": "checkpoints", "seed": "seed", "record": "observables",
    "out": "out_dir", "cushion": "cushion", "loose_window": "loose_window",
    "workers": "workers", "chunk_size": "chunk_size",
}


def _simulate(args) -> int:
    fields = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            fields.update(json.load(fh))
    for flag, key in _CONFIG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None and val is not False:
            fields[key] = val
    if isinstance(fields.get("checkpoints"), str):
        fields["checkpoints"] = tuple(float(x) for x in fields["checkpoints"].split(","))
    if isinstance(fields.get("observables"), str):
        fields["observables"] = tuple(fields["observables"].split(","))
    if isinstance(fields.get("E"), str):
        fields["E"] = _float_or_inf(fields["E"])
    for req in ("kind", "t_max", "trials", "seed", "out_dir"):
        if req not in fields:
            raise ConfigError(f"missing required option {req!r}")
    fields.setdefault("checkpoints", (fields["t_max"],))
    fields["checkpoints"] = tuple(fields["checkpoints"])
    fields["observables"] = tuple(fields.get("observables", ("endpoint",)))
    cfg = ExperimentConfig(**fields)
    run_experiment(cfg, quiet=args.quiet)
    return 0


def _refdist(args) -> int:
    import numpy as np

    from . import refdist as rd

    if args.law == "goe":
        lo, hi, step = _parse_grid(args.grid, (-10.0, 6.0, 0.01))
        grid = np.arange(lo, hi + 0.5 * step, step)
        rd.write_goe_table(args.out, grid, order=args.order)
    else:
        tlo, thi, dt = _parse_grid(args.grid, (-4.0, 4.0, 0.02))
        mlo, mhi, dm = _parse_grid(args.mgrid, (-4.5, 3.5, 0.02))
        grid = rd.build_argmax_grid(tlo, thi, dt, mlo, mhi, dm, order=args.order)
        rd.write_argmax_table(args.out, grid)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args)
        if args.command == "refdist":
            return _refdist(args)
        if args.command == "analyze":
            analyze(args.in_dir, args.ref_dir, args.out_dir,
                    recheck=args.recheck, quiet=args.quiet)
            return 0
    except (ConfigError, ValueError) as exc:
        print(f"sepgeo: config error: {exc}", file=sys.stderr)
        return 2
    except ContaminationAbort as exc:
        print(f"sepgeo: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
