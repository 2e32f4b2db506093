"""Experiment orchestration: deterministic parallel trials, raw-sample
persistence, and analysis reports.

One experiment = one model + flat initial data on a label window + one target
label, simulated for ``trials`` independent trials with per-trial
counter-based seeds.  Trials are computed in fixed-size chunks; each chunk is
persisted as an .npz and the merged raw CSV is byte-identical across reruns
and resumes, independent of worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__ as _VERSION
from . import _kernels
from .backend import BACKEND, num_threads, set_num_threads
from .geodesics import CBRT2, rescale_endpoint
from .models import build_rate_model, initial_condition
from .rng import derive_key, trial_generator
from .scaling import coefficients, rescale_position
from .stats import MomentAccumulator, convergence_rate, empirical_density, ks_distance, moments

RAW_SCHEMA = ("trial", "t", "endpoint_label", "endpoint_position",
              "target_position", "discrepancy", "varmin_value",
              "varmin_label", "flags")
EXCLUDE_MASK = (_kernels.FLAG_CONTAMINATED | _kernels.FLAG_LOG_OVERFLOW
                | _kernels.FLAG_CHAIN_VIOLATION)
OBSERVABLES = ("endpoint", "discrepancy", "position", "varmin")
POSITION_SHIFT = 0.385  # empirical order-one lag of the mean


class ConfigError(ValueError):
    pass


class ContaminationAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    t_max: float
    checkpoints: tuple
    trials: int
    seed: int
    out_dir: str
    p: float | None = None
    beta: float | None = None
    E: float | None = None
    rho: float = 0.5
    n_max: int | None = None
    target: int | None = None
    observables: tuple = ("endpoint",)
    cushion: float = 8.0
    loose_window: bool = False
    chunk_size: int = 2048
    workers: int = 0
    varmin_w0: int = 24
    varmin_wmax: int = 384
    varmin_margin: int = 6
    varmin_edge: int = 8

    def model(self):
        return build_rate_model(self.kind, p=self.p, beta=self.beta, E=self.E)

    def coeffs(self):
        return coefficients(self.model(), self.rho)

    def resolved(self) -> "ExperimentConfig":
        """Validate and fill in the window placement."""
        if self.t_max <= 0:
            raise ConfigError("t_max must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        chks = tuple(float(t) for t in self.checkpoints)
        if not chks:
            raise ConfigError("at least one checkpoint required")
        if list(chks) != sorted(chks) or chks[0] <= 0 or chks[-1] > self.t_max:
            raise ConfigError("checkpoints must be sorted, positive, <= t_max")
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise ConfigError(f"unknown observables {sorted(bad)}")
        try:
            model = self.model()
            co = self.coeffs()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        sigma, drift, fan = window_scales(co, self.t_max)
        lo_cushion = int(math.ceil(self.cushion * sigma))
        hi_cushion = (int(math.ceil(self.cushion * sigma)) if model.has_left_jumps
                      else int(math.ceil(2.0 * sigma)) + 8)
        target = self.target
        n_max = self.n_max
        if target is None:
            target = int(math.ceil(fan)) + lo_cushion + int(math.ceil(drift))
        if n_max is None:
            n_max = target + hi_cushion + 1
        ok = (target - math.ceil(drift) - lo_cushion >= math.ceil(fan)
              and target + hi_cushion < n_max)
        if not ok and not self.loose_window:
            raise ConfigError(
                f"target {target} / n_max {n_max} violate the placement rule: "
                f"need >= {lo_cushion} labels below the characteristic endpoint "
                f"(past the {math.ceil(fan)}-label fan) and {hi_cushion} above "
                f"the target at t_max={self.t_max}")
        if not 0 <= target < n_max:
            raise ConfigError("target outside the simulated window")
        object.__setattr__(self, "checkpoints", chks)
        object.__setattr__(self, "target", int(target))
        object.__setattr__(self, "n_max", int(n_max))
        return self

    def config_hash(self) -> str:
        payload = {k: v for k, v in asdict(self).items()
                   if k not in ("out_dir", "workers", "chunk_size")}
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def window_scales(co, t_max: float):
    """(endpoint fluctuation scale, characteristic drift, fan reach), in labels."""
    sigma = co.rho * CBRT2 * co.ell * t_max ** (2.0 / 3.0)
    drift = co.rho * co.velocity * t_max
    fan = co.J * t_max
    return sigma, drift, fan


def _chunk_path(out_dir: str, idx: int) -> str:
    return os.path.join(out_dir, "chunks", f"chunk_{idx:05d}.npz")


def _compute_chunk(cfg: ExperimentConfig, k0: int, k1: int) -> dict:
    model = cfg.model()
    init = initial_condition("flat", rho=cfg.rho, labels=range(cfg.n_max))
    pos0 = init.positions.astype(np.int64)
    atab, gtab, rmax_r, rstar = model.kernel_args()
    nchk = len(cfg.checkpoints)
    nc = k1 - k0

    keys = np.empty(nc, dtype=np.uint64)
    cuts = np.empty((nc, nchk), dtype=np.float64)
    n_events = np.empty(nc, dtype=np.int64)
    seg = np.diff(np.concatenate([[0.0], np.asarray(cfg.checkpoints)]))
    lam = cfg.n_max * rstar * seg
    for i, k in enumerate(range(k0, k1)):
        keys[i] = derive_key(cfg.seed, k)
        counts = trial_generator(cfg.seed, k, purpose=2).poisson(lam)
        cum = np.cumsum(counts)
        cuts[i] = cum - 0.5
        n_events[i] = cum[-1]

    # suppressed-count bound: at most ~55% of a label's attempts block at
    # rho=1/2; 0.65 + 8 sigma leaves the overflow flag as a backstop
    rate_r = rmax_r
    capR = int(min(0.65 * rate_r * cfg.t_max + 8 * math.sqrt(rate_r * cfg.t_max) + 64,
                   n_events.max() + 1))
    rate_l = model.rmax_left
    capL = int(min(0.65 * rate_l * cfg.t_max + 8 * math.sqrt(max(rate_l * cfg.t_max, 1.0)) + 64,
                   n_events.max() + 1)) if rate_l > 0 else 1

    out = {
        "target_pos": np.empty((nc, nchk), np.int64),
        "endpoint": np.empty((nc, nchk), np.int32),
        "endpoint_pos": np.empty((nc, nchk), np.int64),
        "switches": np.empty((nc, nchk), np.int32),
        "disc": np.empty((nc, nchk), np.int64),
        "var_val": np.empty((nc, nchk), np.int64),
        "var_arg": np.empty((nc, nchk), np.int32),
        "flags": np.empty((nc, nchk), np.uint8),
        "attempts": np.empty(nc, np.int64),
        "events": np.empty(nc, np.int64),
    }
    want_disc = "discrepancy" in cfg.observables
    want_var = "varmin" in cfg.observables
    n_workers = max(1, min(num_threads(), nc))
    env_rates = bool(atab.max() != atab.min() or gtab.max() != gtab.min())
    _kernels.simulate_trials(keys, cuts, n_events, pos0, cfg.target,
                             atab, gtab, rmax_r, rstar, env_rates, capR, capL,
                             n_workers,
                             want_disc, want_var, cfg.varmin_w0, cfg.varmin_wmax,
                             cfg.varmin_margin, cfg.varmin_edge,
                             out["target_pos"], out["endpoint"],
                             out["endpoint_pos"], out["switches"],
                             out["disc"], out["var_val"], out["var_arg"],
                             out["flags"], out["attempts"], out["events"])
    return out


def run_experiment(cfg: ExperimentConfig, quiet: bool = False) -> dict:
    """Run (or resume) all trials; write chunk files, raw.csv, manifest."""
    cfg = cfg.resolved()
    if cfg.workers:
        set_num_threads(cfg.workers)
    os.makedirs(os.path.join(cfg.out_dir, "chunks"), exist_ok=True)
    manifest_path = os.path.join(cfg.out_dir, "manifest.json")
    chash = cfg.config_hash()
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            old = json.load(fh)
        if old.get("config_hash") != chash:
            raise ConfigError(
                f"output dir {cfg.out_dir} holds a different experiment "
                f"({old.get('config_hash')} != {chash})")
    co = cfg.coeffs()
    manifest = {
        "config": asdict(cfg),
        "config_hash": chash,
        "schema": list(RAW_SCHEMA),
        "version": _VERSION,
        "backend": BACKEND,
        "coefficients": {"rho": co.rho, "J": co.J, "Jp": co.Jp, "Jpp": co.Jpp,
                         "A": co.A, "Gamma": co.Gamma, "theta": co.theta,
                         "velocity": co.velocity, "ell": co.ell},
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)

    n_chunks = (cfg.trials + cfg.chunk_size - 1) // cfg.chunk_size
    for ci in range(n_chunks):
        path = _chunk_path(cfg.out_dir, ci)
        if os.path.exists(path):
            continue
        k0 = ci * cfg.chunk_size
        k1 = min(k0 + cfg.chunk_size, cfg.trials)
        t0 = time.perf_counter()
        data = _compute_chunk(cfg, k0, k1)
        tmp = path + ".tmp.npz"
        np.savez(tmp, **data)
        os.replace(tmp, path)
        if not quiet:
            dt = time.perf_counter() - t0
            print(f"[sepgeo] chunk {ci + 1}/{n_chunks} "
                  f"({k1 - k0} trials, {dt:.1f}s)", flush=True)

    return _merge_raw(cfg, n_chunks, quiet=quiet)


def _fmt_t(t: float) -> str:
    return f"{t:g}"


def _merge_raw(cfg: ExperimentConfig, n_chunks: int, quiet: bool = False) -> dict:
    raw_path = os.path.join(cfg.out_dir, "raw.csv")
    tmp = raw_path + ".tmp"
    nchk = len(cfg.checkpoints)
    n_rows = 0
    n_flagged = 0
    n_contaminated = 0
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(",".join(RAW_SCHEMA) + "\n")
        for ci in range(n_chunks):
            with np.load(_chunk_path(cfg.out_dir, ci)) as z:
                target_pos = z["target_pos"]
                endpoint = z["endpoint"]
                endpoint_pos = z["endpoint_pos"]
                disc = z["disc"]
                var_val = z["var_val"]
                var_arg = z["var_arg"]
                flags = z["flags"]
            k0 = ci * cfg.chunk_size
            for i in range(target_pos.shape[0]):
                for c in range(nchk):
                    fl = int(flags[i, c])
                    n_rows += 1
                    if fl & EXCLUDE_MASK:
                        n_flagged += 1
                    if fl & _kernels.FLAG_CONTAMINATED:
                        n_contaminated += 1
                    d = "" if disc[i, c] == _kernels.VAL_NONE else str(int(disc[i, c]))
                    vv = "" if var_val[i, c] == _kernels.VAL_NONE else str(int(var_val[i, c]))
                    va = "" if var_arg[i, c] < 0 else str(int(var_arg[i, c]))
                    fh.write(f"{k0 + i},{_fmt_t(cfg.checkpoints[c])},"
                             f"{int(endpoint[i, c])},{int(endpoint_pos[i, c])},"
                             f"{int(target_pos[i, c])},{d},{vv},{va},{fl}\n")
    os.replace(tmp, raw_path)
    rate = n_contaminated / max(n_rows, 1)
    summary = {"rows": n_rows, "flagged": n_flagged,
               "contaminated": n_contaminated, "contamination_rate": rate,
               "raw": raw_path}
    with open(os.path.join(cfg.out_dir, "run_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
    if not quiet:
        print(f"[sepgeo] {n_rows} rows, contamination rate {rate:.2e}")
    if rate > 0.01:
        raise ContaminationAbort(
            f"contamination rate {rate:.3%} exceeds 1% "
            f"(window too small for t_max={cfg.t_max}?)")
    return summary


def _load_raw(in_dir: str):
    manifest_path = os.path.join(in_dir, "manifest.json")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    raw = np.genfromtxt(os.path.join(in_dir, "raw.csv"), delimiter=",",
                        names=True, encoding="utf-8")
    return manifest, raw


def _references(ref_dir: str | None):
    refs = {}
    if ref_dir is None:
        return refs
    argmax_csv = os.path.join(ref_dir, "argmax.csv")
    goe_csv = os.path.join(ref_dir, "goe.csv")
    if os.path.exists(argmax_csv):
        tab = np.genfromtxt(argmax_csv, delimiter=",", names=True)
        with open(argmax_csv + ".moments.json", encoding="utf-8") as fh:
            mom = json.load(fh)
        refs["uhat"] = {"x": tab["t"], "F": tab["F_uhat"], "moments": mom}
    if os.path.exists(goe_csv):
        tab = np.genfromtxt(goe_csv, delimiter=",", names=True)
        with open(goe_csv + ".moments.json", encoding="utf-8") as fh:
            mom = json.load(fh)
        # X_GOE with P(X <= s) = F_GOE(2s): halve the abscissa
        refs["goe2"] = {"x": tab["s"] / 2.0,
                        "F": tab["F_GOE"],
                        "moments": {"mean": mom["mean"] / 2.0,
                                    "var": mom["var"] / 4.0,
                                    "skew": mom["skew"], "kurt": mom["kurt"]}}
    return refs


def _moments_two_ways(samples: np.ndarray, chunk: int = 4096):
    """Streaming-merge statistics plus the direct one-shot recomputation."""
    acc = MomentAccumulator(shift=float(samples[0]))
    for i in range(0, samples.size, chunk):
        acc.add(samples[i:i + chunk])
    return acc.finalize(), moments(samples)


def _rel_diff(a: float | None, b: float | None) -> float:
    if a is None or b is None:
        return 0.0 if a is b else math.inf
    return abs(a - b) / max(1.0, abs(a), abs(b))


def analyze(in_dir: str, ref_dir: str | None, out_dir: str,
            recheck: bool = False, quiet: bool = False) -> dict:
    """Aggregate raw samples into the statistics report and figure tables."""
    manifest, raw = _load_raw(in_dir)
    cfg = manifest["config"]
    model = build_rate_model(cfg["kind"], p=cfg["p"], beta=cfg["beta"], E=cfg["E"])
    co = coefficients(model, cfg["rho"])
    init = initial_condition("flat", rho=cfg["rho"], labels=range(cfg["n_max"]))
    x0 = init.position_of(cfg["target"])
    refs = _references(ref_dir)
    os.makedirs(out_dir, exist_ok=True)

    flags = raw["flags"].astype(np.int64)
    usable = (flags & EXCLUDE_MASK) == 0
    ts = np.asarray(cfg["checkpoints"], dtype=np.float64)

    report = {
        "config_hash": manifest["config_hash"],
        "coefficients": manifest["coefficients"],
        "trials": cfg["trials"],
        "rows": int(raw.shape[0]),
        "excluded_rows": int(np.sum(~usable)),
        "observables": {},
    }
    moments_rows = []
    recheck_worst = 0.0

    def series_for(obs: str, t: float, sel: np.ndarray) -> np.ndarray:
        if obs == "endpoint":
            disp = raw["endpoint_position"][sel] - x0
            return np.asarray(rescale_endpoint(disp, co, t))
        if obs == "discrepancy":
            return raw["discrepancy"][sel].astype(np.float64)
        if obs == "position":
            disp = raw["target_position"][sel] - x0
            return np.array([rescale_position(d, co, t, shift=POSITION_SHIFT)
                             for d in disp])
        if obs == "position_unshifted":
            disp = raw["target_position"][sel] - x0
            return np.array([rescale_position(d, co, t) for d in disp])
        if obs == "varmin_gap":
            return (raw["varmin_value"][sel] - raw["target_position"][sel]) \
                / t ** (1.0 / 3.0)
        raise KeyError(obs)

    blocks = []
    for obs in cfg["observables"]:
        if obs == "endpoint":
            blocks.append(("endpoint", "uhat"))
        elif obs == "discrepancy":
            blocks.append(("discrepancy", None))
        elif obs == "position":
            blocks.append(("position", "goe2"))
            blocks.append(("position_unshifted", "goe2"))
        elif obs == "varmin":
            blocks.append(("varmin_gap", None))

    for obs, ref_name in blocks:
        per_t = {}
        for t in ts:
            sel = usable & (raw["t"] == t)
            if obs == "varmin_gap":
                sel = (sel & ~np.isnan(raw["varmin_value"])
                       & ((flags & _kernels.FLAG_VARMIN_OPEN) == 0))
            if obs == "discrepancy":
                sel = sel & ~np.isnan(raw["discrepancy"])
            if not np.any(sel):
                continue
            samples = series_for(obs, t, sel)
            stream_stats, direct_stats = _moments_two_ways(samples)
            if recheck:
                for k, v in stream_stats.as_dict().items():
                    recheck_worst = max(recheck_worst,
                                        _rel_diff(v, direct_stats.as_dict()[k]))
            entry = direct_stats.as_dict()
            moments_rows.append((obs, t, entry))
            if ref_name and ref_name in refs:
                ref = refs[ref_name]
                entry["ks"] = ks_distance(samples, ref["x"], ref["F"])
                entry["dev_mean"] = abs(entry["mean"] - ref["moments"]["mean"])
                entry["dev_var"] = abs(entry["var"] - ref["moments"]["var"])
                if entry["skew"] is not None:
                    entry["dev_skew"] = abs(entry["skew"] - ref["moments"]["skew"])
            elif ref_name:
                raise ConfigError(f"missing reference table for {obs}")
            mids, dens = empirical_density(samples) if samples.size >= 100 else (None, None)
            if mids is not None:
                dpath = os.path.join(out_dir, f"density_{obs}_t{_fmt_t(t)}.csv")
                with open(dpath, "w", encoding="utf-8") as fh:
                    fh.write("midpoint,density\n")
                    for row in zip(mids, dens):
                        fh.write("%.10g,%.10g\n" % row)
                entry["density_table"] = os.path.basename(dpath)
            if obs == "endpoint":
                centered = samples - samples.mean()
                entry["centered_var"] = float(np.var(centered))
            per_t[_fmt_t(t)] = entry
        block = {"per_t": per_t}
        # power-law convergence fits across the checkpoint ladder
        if ref_name and ref_name in refs and len(per_t) >= 3:
            tt = [float(k) for k in per_t]
            for key in ("dev_mean", "dev_var"):
                ds = [per_t[_fmt_t(t)][key] for t in tt]
                if all(d > 0 for d in ds):
                    slope, intercept, resid = convergence_rate(tt, ds)
                    block[f"fit_{key}"] = {"slope": slope,
                                           "intercept": intercept,
                                           "residual": resid}
        report["observables"][obs] = block

    with open(os.path.join(out_dir, "moments.csv"), "w", encoding="utf-8") as fh:
        fh.write("observable,t,n,mean,var,skew,kurt,se_mean,se_var\n")
        for obs, t, e in moments_rows:
            fh.write(f"{obs},{_fmt_t(t)},{e['n']},{e['mean']!r},{e['var']!r},"
                     f"{'' if e['skew'] is None else repr(e['skew'])},"
                     f"{'' if e['kurt'] is None else repr(e['kurt'])},"
                     f"{e['se_mean']!r},{e['se_var']!r}\n")

    if recheck:
        report["recheck"] = {"max_rel_diff": recheck_worst,
                             "ok": recheck_worst < 1e-9}
        if not report["recheck"]["ok"]:
            raise AssertionError(
                f"recheck mismatch: streaming vs direct differ by {recheck_worst}")
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    if not quiet:
        print(f"[sepgeo] report -> {report_path}")
    return report
