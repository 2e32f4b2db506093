"""Hot kernels: event loops, clock replays, backward geodesic scans.

All functions here are numba-compiled under the default backend and run as
plain Python under SEPGEO_BACKEND=numpy (identical bits, far slower).

Clock coordinate
----------------
The engine runs the uniformized chain of the exclusion process: proposals
arrive at total rate N * rstar, the proposed particle is uniform on the
labels, and the window-dependent thinning picks the direction (or a no-op).
In counter mode the clock of event i is simply ``i`` and checkpoint cuts are
pre-drawn Poisson event counts shifted by -1/2; in explicit mode events carry
real times and cuts are the checkpoint times.  Both coordinates are float64
and every comparison is the same code path.

Suppressed-jump logs store the clock of each blocked attempt per label; the
backward scan reconstructs the geodesic endpoint from them.  Replays rebuild
the coupled step process from the identical stream without storing it.
"""

from __future__ import annotations

import numpy as np

from .backend import njit_maybe, prange
from .rng import stream_u64, u64_to_unit

FLAG_CONTAMINATED = 1
FLAG_LOG_OVERFLOW = 2
FLAG_VARMIN_OPEN = 4
FLAG_CHAIN_VIOLATION = 8

VAL_NONE = np.int64(-(2 ** 62))

_EMPTY_F8 = np.empty(0, dtype=np.float64)
_EMPTY_I4 = np.empty(0, dtype=np.int32)
_EMPTY_I1 = np.empty(0, dtype=np.int8)
_EMPTY_I8 = np.empty(0, dtype=np.int64)


@njit_maybe(inline="always")
def _try_right(pos, m, n_labels, clock, supR, supR_n, attempts):
    """Execute or log the right attempt of particle m.  Returns overflow flag."""
    j = pos[m]
    attempts[m] += 1
    if m > 0 and pos[m - 1] == j + 1:
        k = supR_n[m]
        if k < supR.shape[1]:
            supR[m, k] = clock
            supR_n[m] = k + 1
            return 0
        return FLAG_LOG_OVERFLOW
    pos[m] = j + 1
    return 0


@njit_maybe(inline="always")
def _try_left(pos, m, n_labels, clock, supL, supL_n, attempts):
    j = pos[m]
    attempts[m] += 1
    if m + 1 < n_labels and pos[m + 1] == j - 1:
        k = supL_n[m]
        if k < supL.shape[1]:
            supL[m, k] = clock
            supL_n[m] = k + 1
            return 0
        return FLAG_LOG_OVERFLOW
    pos[m] = j - 1
    return 0


@njit_maybe()
def chain_sim(key, use_stream, ev_clock, ev_label, ev_dir, n_events,
              pos, atab, gtab, rmax_r, rstar, env_rates,
              cuts, chk_positions, chk_event_idx,
              supR, supR_n, supL, supL_n, attempts):
    """One trial of the exclusion chain; snapshots state at the cut clocks.

    ``env_rates`` marks window-dependent rate tables (the speed-changed
    model); constant-rate models skip the witness lookups since every
    proposal in the matching band is an attempt.

    Boundary rules: the rightmost particle (label 0) has unbounded room, the
    leftmost (label N-1) never jumps left and such attempts are not logged.
    """
    n_labels = pos.shape[0]
    nchk = cuts.shape[0]
    flags = 0
    c = 0
    for i in range(n_events):
        clock = float(i) if use_stream else ev_clock[i]
        while c < nchk and clock > cuts[c]:
            for a in range(n_labels):
                chk_positions[c, a] = pos[a]
            chk_event_idx[c] = i
            c += 1
        if use_stream:
            z = stream_u64(key, i)
            v = u64_to_unit(z) * n_labels
            m = int(v)
            if m >= n_labels:
                m = n_labels - 1
            x = (v - m) * rstar
            if x < rmax_r:
                if env_rates:
                    # witnesses of the right window: eta(j-1), eta(j+2)
                    j = pos[m]
                    blocked = m > 0 and pos[m - 1] == j + 1
                    wl = 1 if (m + 1 < n_labels and pos[m + 1] == j - 1) else 0
                    if blocked:
                        wr = 1 if (m - 2 >= 0 and pos[m - 2] == j + 2) else 0
                    else:
                        wr = 1 if (m - 1 >= 0 and pos[m - 1] == j + 2) else 0
                    if x < atab[2 * wl + wr]:
                        flags |= _try_right(pos, m, n_labels, clock, supR, supR_n, attempts)
                else:
                    flags |= _try_right(pos, m, n_labels, clock, supR, supR_n, attempts)
            elif m < n_labels - 1:
                if env_rates:
                    # witnesses of the left window: eta(j-2), eta(j+1)
                    j = pos[m]
                    blocked = pos[m + 1] == j - 1
                    wr = 1 if (m - 1 >= 0 and pos[m - 1] == j + 1) else 0
                    if blocked:
                        wl = 1 if (m + 2 < n_labels and pos[m + 2] == j - 2) else 0
                    else:
                        wl = 1 if (m + 1 < n_labels and pos[m + 1] == j - 2) else 0
                    if x - rmax_r < gtab[2 * wl + wr]:
                        flags |= _try_left(pos, m, n_labels, clock, supL, supL_n, attempts)
                else:
                    flags |= _try_left(pos, m, n_labels, clock, supL, supL_n, attempts)
        else:
            m = ev_label[i]
            if ev_dir[i] > 0:
                flags |= _try_right(pos, m, n_labels, clock, supR, supR_n, attempts)
            elif m < n_labels - 1:
                flags |= _try_left(pos, m, n_labels, clock, supL, supL_n, attempts)
    while c < nchk:
        for a in range(n_labels):
            chk_positions[c, a] = pos[a]
        chk_event_idx[c] = n_events
        c += 1
    return flags


@njit_maybe(inline="always")
def _latest_before(row, n, s, inclusive):
    """Largest clock in sorted row[:n] that is < s (or <= s); -1 if none."""
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) >> 1
        v = row[mid]
        if v < s or (inclusive and v == s):
            lo = mid + 1
        else:
            hi = mid
    if lo > 0:
        return row[lo - 1]
    return -1.0


@njit_maybe()
def backward_scan(supR, supR_n, supL, supL_n, start_label, start_clock, n_labels):
    """Backward index walk from (start_label, start_clock) down to clock 0.

    Follows the blocking particle: a suppressed right attempt hands the walk
    to the right neighbour (label-1), a suppressed left attempt to the left
    neighbour (label+1).  The first lookup is inclusive of the start clock,
    later ones strictly before the previous switch.  Returns
    (endpoint_label, n_switches, contaminated); the walk is contaminated when
    it touches the window bounds, where the finite window no longer models
    the infinite system.
    """
    m = start_label
    s = start_clock
    inclusive = True
    nsw = 0
    touched = m <= 0 or m >= n_labels - 1
    while True:
        tr = _latest_before(supR[m], supR_n[m], s, inclusive)
        tl = _latest_before(supL[m], supL_n[m], s, inclusive)
        if tr < 0.0 and tl < 0.0:
            return m, nsw, (1 if touched else 0)
        if tr > tl:
            nm = m - 1
            s = tr
        else:
            nm = m + 1
            s = tl
        if nm < 0 or nm >= n_labels:
            return m, nsw, 1
        m = nm
        if m <= 0 or m >= n_labels - 1:
            touched = True
        nsw += 1
        inclusive = False


@njit_maybe()
def replay_step_values(key, use_stream, ev_label, ev_dir, n_labels,
                       rmax_r, rstar, chk_event_idx, upto_chk,
                       M, anchor, target_k, out_vals, out_final_pos):
    """Replay the step-coupled process driven by the base run's stream.

    Step particle k (k = 0 .. n_labels-1-M) consumes the attempts of base
    label k+M and starts at anchor-k, the packed configuration anchored at
    the base particle M's initial position.  Valid for constant-rate models
    only (the thinning must not depend on the environment).  Records
    zpos[target_k] at each checkpoint cut up to ``upto_chk``; VAL_NONE when
    target_k lies outside the step window.  If out_final_pos is non-empty the
    full configuration at the last cut is copied into it.
    """
    kcount = n_labels - M
    zpos = np.empty(kcount, np.int64)
    for k in range(kcount):
        zpos[k] = anchor - k
    n_events = chk_event_idx[upto_chk]
    c = 0
    for i in range(n_events):
        while c <= upto_chk and i >= chk_event_idx[c]:
            out_vals[c] = zpos[target_k] if 0 <= target_k < kcount else VAL_NONE
            c += 1
        if use_stream:
            z = stream_u64(key, i)
            v = u64_to_unit(z) * n_labels
            m = int(v)
            if m >= n_labels:
                m = n_labels - 1
            x = (v - m) * rstar
            if x < rmax_r:
                dirn = 1
            elif x < rstar:
                dirn = -1
            else:
                continue
        else:
            m = ev_label[i]
            dirn = ev_dir[i]
        k = m - M
        if k < 0 or k >= kcount:
            continue
        j = zpos[k]
        if dirn > 0:
            if not (k > 0 and zpos[k - 1] == j + 1):
                zpos[k] = j + 1
        else:
            if k < kcount - 1 and zpos[k + 1] != j - 1:
                zpos[k] = j - 1
    while c <= upto_chk:
        out_vals[c] = zpos[target_k] if 0 <= target_k < kcount else VAL_NONE
        c += 1
    for k in range(out_final_pos.shape[0]):
        out_final_pos[k] = zpos[k]


@njit_maybe()
def _ensure_values(key, use_stream, ev_label, ev_dir, n_labels, rmax_r, rstar,
                   chk_event_idx, target, pos0, M, upto_chk, vals, have):
    """Fill the value cache row vals[M, 0..upto_chk] if not yet computed.

    vals[M, c] = zpos_{target-M}(cut_c) of the step process shifted by M,
    anchored at pos0[M]; this is the variational term
    X^{step,X,M}_{target-M}(t_c) + X_M(0).
    """
    if have[M] > upto_chk:
        return
    replay_step_values(key, use_stream, ev_label, ev_dir, n_labels,
                       rmax_r, rstar, chk_event_idx, upto_chk,
                       M, pos0[M], target - M, vals[M],
                       np.empty(0, np.int64))
    have[M] = upto_chk + 1


@njit_maybe()
def _varmin_window(vals, lo, hi, c):
    """(min value, largest minimizer) of vals[lo..hi, c]."""
    best = vals[lo, c]
    arg = lo
    for m in range(lo + 1, hi + 1):
        v = vals[m, c]
        if v != VAL_NONE and (best == VAL_NONE or v <= best):
            best = v
            arg = m
    return best, arg


@njit_maybe(parallel=True)
def simulate_trials(keys, cuts, n_events_arr, pos0, target,
                    atab, gtab, rmax_r, rstar, env_rates, capR, capL, n_workers,
                    want_disc, want_var, var_w0, var_wmax, var_margin, var_edge,
                    out_target_pos, out_endpoint, out_endpoint_pos, out_switches,
                    out_disc, out_var_val, out_var_arg, out_flags,
                    out_attempts, out_events):
    """Full per-trial pipeline over a block of trials (counter mode only).

    Trials are strided over ``n_workers`` parallel slots so each worker
    allocates its scratch once per chunk; the per-trial outputs depend only
    on the trial key, never on the scheduling.
    """
    nt = keys.shape[0]
    n_labels = pos0.shape[0]
    nchk = cuts.shape[1]
    for w in prange(n_workers):
        pos = np.empty(n_labels, np.int64)
        supR = np.empty((n_labels, capR))
        supL = np.empty((n_labels, capL))
        supR_n = np.empty(n_labels, np.int64)
        supL_n = np.empty(n_labels, np.int64)
        attempts = np.empty(n_labels, np.int64)
        chk_positions = np.empty((nchk, n_labels), np.int64)
        chk_event_idx = np.empty(nchk, np.int64)
        vals = np.empty((n_labels, nchk), np.int64)
        have = np.empty(n_labels, np.int64)
        for tr in range(w, nt, n_workers):
            key = keys[tr]
            for a in range(n_labels):
                pos[a] = pos0[a]
            supR_n[:] = 0
            supL_n[:] = 0
            attempts[:] = 0
            chk_event_idx[:] = 0
            base_flags = chain_sim(key, True, _EMPTY_F8, _EMPTY_I4, _EMPTY_I1,
                                   n_events_arr[tr], pos, atab, gtab, rmax_r,
                                   rstar, env_rates, cuts[tr], chk_positions,
                                   chk_event_idx, supR, supR_n, supL, supL_n,
                                   attempts)
            out_events[tr] = n_events_arr[tr]
            out_attempts[tr] = attempts.sum()
            have[:] = 0
            _trial_observables(key, target, pos0, rmax_r, rstar, nchk, n_labels,
                               cuts[tr], chk_positions, chk_event_idx,
                               supR, supR_n, supL, supL_n, vals, have,
                               base_flags, want_disc, want_var, var_w0,
                               var_wmax, var_margin, var_edge, tr,
                               out_target_pos, out_endpoint, out_endpoint_pos,
                               out_switches, out_disc, out_var_val,
                               out_var_arg, out_flags)


@njit_maybe()
def _trial_observables(key, target, pos0, rmax_r, rstar, nchk, n_labels,
                       cuts_tr, chk_positions, chk_event_idx,
                       supR, supR_n, supL, supL_n, vals, have,
                       base_flags, want_disc, want_var, var_w0,
                       var_wmax, var_margin, var_edge, tr,
                       out_target_pos, out_endpoint, out_endpoint_pos,
                       out_switches, out_disc, out_var_val,
                       out_var_arg, out_flags):
    for c in range(nchk):
            flags = base_flags
            xt = chk_positions[c, target]
            out_target_pos[tr, c] = xt
            ep, nsw, contam = backward_scan(supR, supR_n, supL, supL_n,
                                            target, cuts_tr[c], n_labels)
            out_endpoint[tr, c] = ep
            out_endpoint_pos[tr, c] = pos0[ep]
            out_switches[tr, c] = nsw
            if contam == 1:
                flags |= FLAG_CONTAMINATED
            out_disc[tr, c] = VAL_NONE
            out_var_val[tr, c] = VAL_NONE
            out_var_arg[tr, c] = -1
            if contam == 0 and want_disc and ep <= target:
                # D is defined only when the walk ended at or below the
                # target; above it the step window has no particle N-M
                _ensure_values(key, True, _EMPTY_I4, _EMPTY_I1, n_labels,
                               rmax_r, rstar, chk_event_idx, target, pos0,
                               ep, c, vals, have)
                d = vals[ep, c] - xt
                out_disc[tr, c] = d
                if d < 0:
                    flags |= FLAG_CHAIN_VIOLATION
            if contam == 0 and want_var:
                center = ep if ep < target else target
                w = var_w0
                lo = center - w if center - w > 0 else 0
                hi = center + w if center + w < target else target
                while True:
                    for M in range(lo, hi + 1):
                        _ensure_values(key, True, _EMPTY_I4, _EMPTY_I1, n_labels,
                                       rmax_r, rstar, chk_event_idx, target,
                                       pos0, M, c, vals, have)
                    best, arg = _varmin_window(vals, lo, hi, c)
                    # edge conclusiveness: the window boundary must sit well
                    # above the interior minimum, unless it is a hard bound
                    left_ok = lo == 0
                    if not left_ok:
                        edge_min, _ = _varmin_window(vals, lo, min(lo + var_edge, hi), c)
                        left_ok = edge_min >= best + var_margin
                    right_ok = hi == target
                    if not right_ok:
                        edge_min, _ = _varmin_window(vals, max(hi - var_edge, lo), hi, c)
                        right_ok = edge_min >= best + var_margin
                    if left_ok and right_ok:
                        break
                    if w >= var_wmax:
                        flags |= FLAG_VARMIN_OPEN
                        break
                    w = w * 2
                    lo = center - w if center - w > 0 else 0
                    hi = center + w if center + w < target else target
                # boundary of the SIMULATED range without interior margin is
                # inconclusive; M = target is a legitimate hard bound
                if lo == 0 and arg == 0:
                    flags |= FLAG_VARMIN_OPEN
                out_var_val[tr, c] = best
                out_var_arg[tr, c] = arg
                if best != VAL_NONE and best < xt:
                    flags |= FLAG_CHAIN_VIOLATION
            out_flags[tr, c] = flags
