"""Clock coupling, step-coupled processes, discrepancy, and the variational
minimum used as the exact testing oracle.

All constructions here replay the base run's attempt stream, mapping base
label n to step particle n-M, so they are meaningful only for constant-rate
models (tasep/asep); the speed-changed model is rejected because its
attempt-thinning depends on the environment and per-label clocks do not
determine the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .engine import ClockRecord, RunRecord, evolve
from .geodesics import GeodesicTrace
from .models import KIND_ASEPSC, InitialCondition, RateModel


class CouplingError(ValueError):
    pass


def _check_model(model: RateModel):
    if model.kind == KIND_ASEPSC:
        raise CouplingError("clock coupling is undefined for the speed-changed model")


@dataclass(frozen=True)
class CoupledRun:
    """Step-initial-condition process driven by the base run's shifted clocks."""

    base: RunRecord
    shift: int                  # label offset M
    t: float
    positions: np.ndarray       # X^{step,X,M}_k(t), k = 0 .. kcount-1
    anchor: int                 # X_M(0) of the base run

    def position(self, k: int) -> int:
        return int(self.positions[k])

    def anchored_position(self, k: int) -> int:
        """X^{step,X,M}_k(t) + X_M(0)."""
        return int(self.positions[k]) + self.anchor


def _replay(run: RunRecord, m_window: int, upto_chk: int, want_full: bool):
    key, use_stream, ev_label, ev_dir = run.replay_args()
    atab, gtab, rmax_r, rstar = run.model.kernel_args()
    nchk = upto_chk + 1
    vals = np.full(nchk, _kernels.VAL_NONE, dtype=np.int64)
    kcount = run.n_labels - m_window
    final = np.empty(kcount if want_full else 0, dtype=np.int64)
    anchor = int(run.init.positions[m_window])
    target_k = 0  # caller reads vals only when it passed a real target
    _kernels.replay_step_values(key, use_stream, ev_label, ev_dir,
                                run.n_labels, rmax_r, rstar,
                                run.chk_event_idx, upto_chk, m_window,
                                anchor, target_k, vals, final)
    return vals, final, anchor


def step_coupled_evolve(run: RunRecord, M: int, t: float) -> CoupledRun:
    """Definition of the coupled process: step particle n-M uses label n's clocks."""
    _check_model(run.model)
    mw = int(M) - run.label_base
    if not 0 <= mw < run.n_labels:
        raise CouplingError(f"shift label {M} outside the simulated range")
    chk = run.checkpoint_index(t)
    _, final, anchor = _replay(run, mw, chk, want_full=True)
    return CoupledRun(base=run, shift=int(M), t=t,
                      positions=final - anchor, anchor=anchor)


def _value_at(run: RunRecord, target_label: int, M: int, t: float) -> int:
    """Variational term X^{step,X,M}_{N-M}(t) + X_M(0)."""
    _check_model(run.model)
    base = run.label_base
    mw = int(M) - base
    nw = int(target_label) - base
    if not 0 <= mw < run.n_labels:
        raise CouplingError(f"shift label {M} outside the simulated range")
    if not 0 <= nw < run.n_labels:
        raise CouplingError(f"target label {target_label} outside the simulated range")
    chk = run.checkpoint_index(t)
    key, use_stream, ev_label, ev_dir = run.replay_args()
    atab, gtab, rmax_r, rstar = run.model.kernel_args()
    vals = np.full(chk + 1, _kernels.VAL_NONE, dtype=np.int64)
    _kernels.replay_step_values(key, use_stream, ev_label, ev_dir,
                                run.n_labels, rmax_r, rstar,
                                run.chk_event_idx, chk, mw,
                                int(run.init.positions[mw]), nw - mw,
                                vals, _kernels._EMPTY_I8)
    v = int(vals[chk])
    if v == int(_kernels.VAL_NONE):
        raise CouplingError("target label not covered by the step window")
    return v


def discrepancy(run: RunRecord, trace: GeodesicTrace, t: float) -> int:
    """D_N(t): excess of the geodesic step decomposition over the true position.

    Nonnegative on every trial by the attractivity of the clock coupling;
    a negative value is a hard error, never data.
    """
    _check_model(run.model)
    if trace.contaminated:
        raise CouplingError("contaminated trace")
    value = _value_at(run, trace.target_label, trace.endpoint_label, t)
    d = value - run.position(trace.target_label, t)
    if d < 0:
        raise AssertionError(f"discrepancy {d} < 0 violates the coupling bound")
    return d


@dataclass(frozen=True)
class VariationalResult:
    value: int
    minimizer: int              # largest minimizing label
    interior: bool              # False when the window is inconclusive
    values: dict                # label -> term value


def variational_min(run: RunRecord, target_label: int, t: float,
                    m_range) -> VariationalResult:
    """min over M in m_range of X^{step,X,M}_{N-M}(t) + X_M(0).

    The minimum is inconclusive unless it is attained strictly inside the
    range (the upper end M = N is a legitimate hard bound of the variational
    problem and does not count as a window edge).
    """
    m_range = sorted(int(m) for m in m_range)
    if not m_range:
        raise CouplingError("empty M range")
    values = {}
    for M in m_range:
        values[M] = _value_at(run, target_label, M, t)
    best = min(values.values())
    minimizer = max(M for M, v in values.items() if v == best)
    lo, hi = m_range[0], m_range[-1]
    interior = (lo < minimizer < hi) or (minimizer == hi == int(target_label))
    return VariationalResult(value=int(best), minimizer=int(minimizer),
                             interior=bool(interior), values=values)


def clock_coupled_pair(model: RateModel, init_x: InitialCondition,
                       init_y: InitialCondition, clocks: ClockRecord,
                       t_max: float, checkpoints=()):
    """Evolve two initial conditions with identical per-label clocks."""
    _check_model(model)
    if not np.array_equal(init_x.labels, init_y.labels):
        raise CouplingError("clock coupling needs identical label sets")
    run_x = evolve(model, init_x, clocks, t_max, checkpoints)
    run_y = evolve(model, init_y, clocks, t_max, checkpoints)
    return run_x, run_y


def dominates(run_lo: RunRecord, run_hi: RunRecord) -> bool:
    """Componentwise X <= Y at every recorded checkpoint."""
    return bool(np.all(run_lo.positions <= run_hi.positions))
