"""Backwards index process reconstruction and endpoint rescaling.

The backward walk starts at the target particle at the query time and, at
each suppressed attempt encountered going back, hands over to the particle
that did the blocking: a suppressed right attempt moves the walk to the
right neighbour (label-1 in the right-to-left labeling), a suppressed left
attempt to the left neighbour (label+1).  The walk's label at clock 0 is the
endpoint.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .engine import RunRecord
from .scaling import ScalingCoefficients, coefficients

CBRT2 = 2.0 ** (1.0 / 3.0)


@dataclass(frozen=True)
class GeodesicTrace:
    """Backward walk of one (target, time) query.

    ``switches`` lists (clock, new_label) in walk order, clocks strictly
    decreasing; label values are the run's labels, clocks are event times in
    explicit runs and event indices in counter runs.
    """

    target_label: int
    target_position0: int
    start_time: float
    switches: tuple
    endpoint_label: int | None
    endpoint_position: int | None
    contaminated: bool

    @property
    def n_switches(self) -> int:
        return len(self.switches)


def _latest(values, n, s, inclusive) -> float:
    arr = values[:n]
    i = bisect.bisect_right(arr.tolist(), s) if inclusive else bisect.bisect_left(arr.tolist(), s)
    return float(arr[i - 1]) if i > 0 else -1.0


def backwards_index_process(run: RunRecord, target_label: int, t: float) -> GeodesicTrace:
    """Reconstruct the backward index walk of ``target_label`` from time t."""
    base = run.label_base
    m = int(target_label) - base
    if not 0 <= m < run.n_labels:
        raise ValueError(f"label {target_label} was not simulated")
    chk = run.checkpoint_index(t)
    s = float(run.chk_clock[chk])
    log = run.log

    switches = []
    inclusive = True
    contaminated = False
    cur = m
    while True:
        tr = _latest(log.sup_right[cur], int(log.sup_right_n[cur]), s, inclusive)
        tl = _latest(log.sup_left[cur], int(log.sup_left_n[cur]), s, inclusive)
        if tr < 0.0 and tl < 0.0:
            break
        if tr > tl:
            nxt, s = cur - 1, tr
        else:
            nxt, s = cur + 1, tl
        if nxt < 0 or nxt >= run.n_labels:
            contaminated = True
            break
        cur = nxt
        switches.append((s, cur + base))
        inclusive = False

    for (s1, l1), (s2, l2) in zip(switches, switches[1:]):
        assert s2 < s1 and abs(l2 - l1) == 1

    endpoint = None if contaminated else cur + base
    endpoint_pos = None if contaminated else run.init.position_of(endpoint)
    return GeodesicTrace(target_label=int(target_label),
                         target_position0=run.init.position_of(target_label),
                         start_time=t, switches=tuple(switches),
                         endpoint_label=endpoint, endpoint_position=endpoint_pos,
                         contaminated=contaminated)


def rescale_endpoint(displacement, coeffs: ScalingCoefficients, t):
    """(endpoint displacement - v t) / (2^{1/3} ell t^{2/3}); array-friendly."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    num = np.asarray(displacement, dtype=np.float64) - coeffs.velocity * t
    return num / (CBRT2 * coeffs.ell * t ** (2.0 / 3.0))


def endpoint_rescaled(trace: GeodesicTrace, coeffs: ScalingCoefficients,
                      t: float, model=None) -> float:
    """Rescaled geodesic endpoint B_t of one trace."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if trace.contaminated:
        raise ValueError("contaminated trace cannot be rescaled")
    if model is not None:
        ref = coefficients(model, coeffs.rho)
        if abs(ref.J - coeffs.J) > 1e-12 * max(1.0, abs(ref.J)):
            raise ValueError("coefficients do not match the model")
    disp = trace.endpoint_position - trace.target_position0
    return float(rescale_endpoint(disp, coeffs, t))
