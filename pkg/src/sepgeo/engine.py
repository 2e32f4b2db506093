"""Single-run simulation API over the kernels.

Two randomness schemes drive the same event loop:

* ``counter`` - production scheme.  One splitmix64 stream keyed by the master
  seed supplies every proposal; the chain is uniformized at total rate
  N * rstar and checkpoint states are taken at pre-drawn Poisson event counts,
  which realizes the continuous-time law exactly.  Event clocks are event
  indices.
* ``explicit`` - per-label attempt streams with real times (the pre-drawn
  exponential-waits construction), merged into one ordered event list.  Used
  by the replayable-record API, hand-traced tests, and clock coupling.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .models import InitialCondition, RateModel
from .rng import derive_key, trial_generator

DIR_RIGHT = 1
DIR_LEFT = -1


@dataclass(frozen=True)
class ClockRecord:
    """Replayable randomness for one trial."""

    scheme: str  # 'counter' | 'explicit'
    master_seed: int | None = None
    labels: np.ndarray | None = None          # explicit: label values
    times: tuple = ()                          # explicit: per-label time arrays
    dirs: tuple = ()                           # explicit: per-label +-1 arrays

    @staticmethod
    def counter(master_seed: int) -> "ClockRecord":
        return ClockRecord(scheme="counter", master_seed=int(master_seed))

    @staticmethod
    def explicit(streams: dict) -> "ClockRecord":
        """streams: {label: (times, dirs)} with dirs +1 (right) / -1 (left)."""
        labels = np.array(sorted(streams), dtype=np.int64)
        times, dirs = [], []
        for lab in labels:
            t, d = streams[int(lab)]
            t = np.asarray(t, dtype=np.float64)
            d = np.asarray(d, dtype=np.int8)
            if t.ndim != 1 or t.shape != d.shape:
                raise ValueError("stream arrays must be 1-d and equal length")
            if np.any(np.diff(t) <= 0):
                raise ValueError(f"attempt times of label {lab} must strictly increase")
            times.append(t)
            dirs.append(d)
        return ClockRecord(scheme="explicit", labels=labels,
                           times=tuple(times), dirs=tuple(dirs))

    @staticmethod
    def from_seed_per_label(seed: int, labels, t_max: float, p: float = 1.0) -> "ClockRecord":
        """Pre-drawn rate-1 exponential waits with Bernoulli(p) right marks."""
        streams = {}
        for lab in labels:
            rng = trial_generator(seed, int(lab), purpose=7)
            waits = []
            t = 0.0
            while True:
                t += rng.exponential()
                if t > t_max:
                    break
                waits.append(t)
            times = np.array(waits)
            dirs = np.where(rng.random(len(waits)) < p, DIR_RIGHT, DIR_LEFT).astype(np.int8)
            streams[int(lab)] = (times, dirs)
        return ClockRecord.explicit(streams)

    def merged(self, label_base: int, t_max: float):
        """Explicit events merged by time (ties to the smaller label)."""
        recs = []
        for lab, t, d in zip(self.labels, self.times, self.dirs):
            idx = int(lab) - label_base
            for ti, di in zip(t, d):
                if ti <= t_max:
                    recs.append((float(ti), idx, int(di)))
        recs.sort(key=lambda r: (r[0], r[1]))
        ev_clock = np.array([r[0] for r in recs], dtype=np.float64)
        ev_label = np.array([r[1] for r in recs], dtype=np.int32)
        ev_dir = np.array([r[2] for r in recs], dtype=np.int8)
        return ev_clock, ev_label, ev_dir


@dataclass
class EventLog:
    """Suppressed-attempt clocks per label (sorted ascending)."""

    sup_right: np.ndarray      # (N, capR) clocks
    sup_right_n: np.ndarray
    sup_left: np.ndarray
    sup_left_n: np.ndarray

    def suppressed_right(self, idx: int) -> np.ndarray:
        return self.sup_right[idx, : self.sup_right_n[idx]].copy()

    def suppressed_left(self, idx: int) -> np.ndarray:
        return self.sup_left[idx, : self.sup_left_n[idx]].copy()


@dataclass
class RunRecord:
    """One trial: checkpoint states plus the suppressed-jump log."""

    model: RateModel
    init: InitialCondition
    clock: ClockRecord
    t_max: float
    checkpoints: np.ndarray        # requested times, ascending
    positions: np.ndarray          # (nchk, N) label-indexed positions
    chk_event_idx: np.ndarray      # events executed before each checkpoint
    chk_clock: np.ndarray          # scan clocks for each checkpoint
    log: EventLog
    attempts: np.ndarray
    jumps: int
    flags: int
    n_events: int
    ev_label: np.ndarray | None = None   # explicit mode replay arrays
    ev_dir: np.ndarray | None = None
    stream_key: np.uint64 | None = None

    @property
    def n_labels(self) -> int:
        return self.positions.shape[1]

    @property
    def label_base(self) -> int:
        return int(self.init.labels[0])

    @property
    def contaminated(self) -> bool:
        return bool(self.flags & _kernels.FLAG_LOG_OVERFLOW)

    def checkpoint_index(self, t: float) -> int:
        i = int(np.searchsorted(self.checkpoints, t))
        if i >= len(self.checkpoints) or self.checkpoints[i] != t:
            raise KeyError(f"{t} is not a recorded checkpoint")
        return i

    def positions_at(self, t: float) -> np.ndarray:
        return self.positions[self.checkpoint_index(t)].copy()

    def position(self, label: int, t: float) -> int:
        return int(self.positions[self.checkpoint_index(t), label - self.label_base])

    def replay_args(self):
        """Arguments reproducing this run's event stream in the kernels."""
        if self.clock.scheme == "counter":
            return (self.stream_key, True, _kernels._EMPTY_I4, _kernels._EMPTY_I1)
        return (np.uint64(0), False, self.ev_label, self.ev_dir)


def _log_capacity(rate: float, t_max: float, n_events_bound: float) -> int:
    lam = max(rate * t_max, 1.0)
    return int(min(lam + 8.0 * np.sqrt(lam) + 64.0, n_events_bound + 1.0))


def evolve(model: RateModel, init: InitialCondition, randomness,
           t_max: float, checkpoints=()) -> RunRecord:
    """Run one trial to t_max, recording states at the checkpoint times."""
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if isinstance(randomness, (int, np.integer)):
        randomness = ClockRecord.counter(int(randomness))
    checkpoints = np.asarray(sorted(checkpoints), dtype=np.float64)
    if checkpoints.size and (checkpoints[0] < 0 or checkpoints[-1] > t_max):
        raise ValueError("checkpoints must lie in [0, t_max]")

    n_labels = len(init.labels)
    if n_labels == 0:
        raise ValueError("empty system")
    pos0 = init.positions.astype(np.int64)
    pos = pos0.copy()
    atab, gtab, rmax_r, rstar = model.kernel_args()

    if randomness.scheme == "counter":
        seed = randomness.master_seed
        key = derive_key(seed, 0, 1)
        rng = trial_generator(seed, 0, purpose=2)
        seg_times = np.concatenate([checkpoints, [t_max]])
        seg_lens = np.diff(np.concatenate([[0.0], seg_times]))
        seg_counts = rng.poisson(n_labels * rstar * seg_lens)
        cum = np.cumsum(seg_counts)
        n_events = int(cum[-1])
        cuts = cum[: len(checkpoints)].astype(np.float64) - 0.5
        chk_clock = cuts.copy()
        ev_clock = _kernels._EMPTY_F8
        ev_label = _kernels._EMPTY_I4
        ev_dir = _kernels._EMPTY_I1
        use_stream = True
    else:
        key = np.uint64(0)
        ev_clock, ev_label, ev_dir = randomness.merged(int(init.labels[0]), t_max)
        n_events = len(ev_clock)
        cuts = checkpoints.copy()
        chk_clock = checkpoints.copy()
        use_stream = False

    capR = _log_capacity(rmax_r, t_max, n_events)
    capL = _log_capacity(model.rmax_left, t_max, n_events)
    supR = np.empty((n_labels, capR))
    supL = np.empty((n_labels, max(capL, 1)))
    supR_n = np.zeros(n_labels, np.int64)
    supL_n = np.zeros(n_labels, np.int64)
    attempts = np.zeros(n_labels, np.int64)
    nchk = len(checkpoints)
    chk_positions = np.empty((nchk, n_labels), np.int64)
    chk_event_idx = np.zeros(nchk, np.int64)

    env_rates = bool(atab.max() != atab.min() or gtab.max() != gtab.min())
    flags = _kernels.chain_sim(key, use_stream, ev_clock, ev_label, ev_dir,
                               n_events, pos, atab, gtab, rmax_r, rstar,
                               env_rates, cuts, chk_positions, chk_event_idx,
                               supR, supR_n, supL, supL_n, attempts)

    for c in range(nchk):
        if np.any(np.diff(chk_positions[c]) >= 0):
            raise AssertionError("order preservation violated at a checkpoint")

    log = EventLog(supR, supR_n, supL, supL_n)
    jumps = int(attempts.sum() - supR_n.sum() - supL_n.sum())
    return RunRecord(model=model, init=init, clock=randomness, t_max=t_max,
                     checkpoints=checkpoints, positions=chk_positions,
                     chk_event_idx=chk_event_idx, chk_clock=chk_clock, log=log,
                     attempts=attempts, jumps=jumps, flags=int(flags),
                     n_events=n_events, ev_label=ev_label, ev_dir=ev_dir,
                     stream_key=key)
