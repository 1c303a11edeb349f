"""Compiled interaction loop.

The kernel is protocol-agnostic: agent states are interned integer ids and
pair outcomes come from a lazily filled transition table.  When the kernel
draws a pair whose table entry is missing it returns to the driver, which
computes the outcome in Python, extends the table, and re-enters with the
drawn pair pending.  All random draws therefore happen in exactly the same
order as a naive one-interaction-at-a-time loop, so trajectories are
bit-replayable regardless of how often the kernel is re-entered.

Table entry kinds::

    0  null          pair never changes state
    1  deterministic outcome (aout, bout)
    2  bernoulli     one 53-bit-threshold draw picks (aout,bout) or (alt_aout,alt_bout)

Optional bookkeeping, each gated by a flag so disabled features cost one
predictable branch: marker counts (stop predicates, phase/minute curves),
output-class counts (stabilization index), exact mass accounting (gap
invariant), and suffix-crossing times (clock threshold measurements).
"""

from __future__ import annotations

import numpy as np
from numba import int64, njit, uint64

from .rng import next_u64

# regs[] slots (mutable scalar state shared across kernel re-entries)
R_INTERACTIONS = 0
R_STREAK = 1
R_VERSION = 2
R_CHECKED_VERSION = 3
R_MAXMARKER = 4
R_COUNT_BELOW = 5
R_NEXT_SNAP = 6
R_SNAP_CUR = 7
R_D_NONZERO = 8
R_MASS_VIOL = 9
R_MASS_FIRST = 10
R_PEND_I = 11
R_PEND_J = 12
R_FORCE_SNAP = 13
R_MISS_A = 14
R_MISS_B = 15
R_LAST_I = 16
R_LAST_J = 17
R_LAST_CHANGED = 18
R_SNAP_EVERY = 19
R_SILENT_THRESHOLD = 20
R_LAST_CHANGE_AT = 21
NUM_REGS = 22

# return statuses
ST_GUARD = 1
ST_STOP_TIME = 2
ST_STOP_PRED = 3
ST_MISS = 4
ST_SNAPBUF = 5
ST_CHECK_SILENT = 6

# entry kinds
K_NULL = 0
K_DET = 1
K_BERN = 2

# mass rules (2 bits per side)
M_DET = 0
M_KEEP = 1
M_SUM = 2
M_ZERO = 3

MASS_UNDET = np.int64(np.iinfo(np.int64).min)

PROB_SHIFT = uint64(11)  # 64 - PROB_BITS


@njit(cache=True)
def run_kernel(
    ids,            # int32[n] current state id per agent
    rng,            # uint64[4] xoshiro state
    regs,           # int64[NUM_REGS]
    counts,         # int64[cap] per-id population count
    ever_present,   # int8[cap] has this id ever had count > 0
    row_of,         # int32[cap] pool row per id (-1 until allocated)
    pool,           # int32[rows, cap] entry index per (row_of[a], b); -1 unknown
    ent_kind,       # int8[ecap]
    ent_aout,       # int32[ecap]
    ent_bout,       # int32[ecap]
    ent_alt_aout,   # int32[ecap] bernoulli skip outcomes
    ent_alt_bout,   # int32[ecap]
    ent_thresh,     # uint64[ecap] 53-bit fire thresholds
    ent_massrule,   # int8[ecap] (ruleA << 2) | ruleB for the deterministic/fire branch
    ent_massrule2,  # int8[ecap] same, for the bernoulli skip branch
    marker_of,      # int32[cap]
    mcounts,        # int64[max_marker+1]
    outclass_of,    # int8[cap] output class (-1 none)
    outcounts,      # int64[3]
    full_since,     # int64[3] interaction index when outclass count reached n (-1 if below)
    masses,         # int64[n] exact per-agent mass (numerator, denominator 2^L)
    mass_of,        # int64[cap] expected mass per id, MASS_UNDET if history-dependent
    mass_lo,        # int64[cap] |mass| interval for full-style states (0,0 = skip)
    mass_hi,        # int64[cap]
    mass_sign,      # int8[cap]
    cum_ge,         # int64[max_marker+2] count of agents with marker >= v
    cross_plus,     # int64[max_marker+1] first interaction reaching count >= 1
    cross_01,       # int64[...] count >= thr01
    cross_09,       # int64[...] count >= thr09
    cross_0001,     # int64[...] count >= thr0001
    snapbuf,        # int64[snapcap] flattened snapshots
    n,              # population size
    num_ids,        # live interned id count
    guard,          # absolute interaction bound (always > 0)
    stop_at,        # absolute interaction bound for the stop condition (-1 none)
    pred_kind,      # 0 none, 1 all_marker_ge, 2 any_marker_ge, 3 count_ge, 4 count_le
    pred_value,
    pred_thresh,
    thr01, thr09, thr0001,
    has_out,        # flags (0/1)
    has_mass,
    has_cross,
):
    interactions = regs[R_INTERACTIONS]
    streak = regs[R_STREAK]
    snap_every = regs[R_SNAP_EVERY]
    silent_thr = regs[R_SILENT_THRESHOLD]

    while True:
        if regs[R_PEND_I] >= 0:
            # resume an interaction whose pair was drawn before an escape
            i = int(regs[R_PEND_I])
            j = int(regs[R_PEND_J])
            regs[R_PEND_I] = -1
        else:
            if regs[R_FORCE_SNAP] != 0 and snap_every > 0:
                need = 2 + 2 * regs[R_D_NONZERO]
                if regs[R_SNAP_CUR] + need > snapbuf.shape[0]:
                    regs[R_INTERACTIONS] = interactions
                    regs[R_STREAK] = streak
                    return ST_SNAPBUF
                cur = regs[R_SNAP_CUR]
                snapbuf[cur] = interactions
                cur += 1
                dslot = cur
                cur += 1
                d = 0
                for sid in range(num_ids):
                    if counts[sid] > 0:
                        snapbuf[cur] = sid
                        snapbuf[cur + 1] = counts[sid]
                        cur += 2
                        d += 1
                snapbuf[dslot] = d
                regs[R_SNAP_CUR] = cur
                regs[R_FORCE_SNAP] = 0
            if interactions >= guard:
                regs[R_INTERACTIONS] = interactions
                regs[R_STREAK] = streak
                return ST_GUARD
            if stop_at >= 0 and interactions >= stop_at:
                regs[R_INTERACTIONS] = interactions
                regs[R_STREAK] = streak
                return ST_STOP_TIME
            if silent_thr >= 0 and streak >= silent_thr and regs[R_CHECKED_VERSION] != regs[R_VERSION]:
                regs[R_INTERACTIONS] = interactions
                regs[R_STREAK] = streak
                return ST_CHECK_SILENT
            if snap_every > 0 and interactions >= regs[R_NEXT_SNAP]:
                need = 2 + 2 * regs[R_D_NONZERO]
                if regs[R_SNAP_CUR] + need > snapbuf.shape[0]:
                    regs[R_INTERACTIONS] = interactions
                    regs[R_STREAK] = streak
                    return ST_SNAPBUF
                cur = regs[R_SNAP_CUR]
                snapbuf[cur] = interactions
                cur += 1
                dslot = cur
                cur += 1
                d = 0
                for sid in range(num_ids):
                    if counts[sid] > 0:
                        snapbuf[cur] = sid
                        snapbuf[cur + 1] = counts[sid]
                        cur += 2
                        d += 1
                snapbuf[dslot] = d
                regs[R_SNAP_CUR] = cur
                regs[R_NEXT_SNAP] += snap_every
            i = int64(next_u64(rng) % uint64(n))
            j = int64(next_u64(rng) % uint64(n - 1))
            if j >= i:
                j += 1

        a = ids[i]
        b = ids[j]
        r = row_of[a]
        e = -1
        if r >= 0:
            e = pool[r, b]
        if e < 0:
            regs[R_PEND_I] = i
            regs[R_PEND_J] = j
            regs[R_MISS_A] = a
            regs[R_MISS_B] = b
            regs[R_INTERACTIONS] = interactions
            regs[R_STREAK] = streak
            return ST_MISS

        kind = ent_kind[e]
        if kind == K_NULL:
            streak += 1
            interactions += 1
            regs[R_LAST_I] = i
            regs[R_LAST_J] = j
            regs[R_LAST_CHANGED] = 0
            continue
        if kind == K_BERN:
            if (next_u64(rng) >> PROB_SHIFT) < ent_thresh[e]:
                a2 = ent_aout[e]
                b2 = ent_bout[e]
                rule = ent_massrule[e]
            else:
                a2 = ent_alt_aout[e]
                b2 = ent_alt_bout[e]
                rule = ent_massrule2[e]
        else:
            a2 = ent_aout[e]
            b2 = ent_bout[e]
            rule = ent_massrule[e]

        interactions += 1
        regs[R_LAST_I] = i
        regs[R_LAST_J] = j
        if a2 == a and b2 == b:
            streak += 1
            regs[R_LAST_CHANGED] = 0
            continue
        regs[R_LAST_CHANGED] = 1
        regs[R_LAST_CHANGE_AT] = interactions
        streak = 0
        regs[R_VERSION] += 1
        ids[i] = a2
        ids[j] = b2

        counts[a] -= 1
        if counts[a] == 0:
            regs[R_D_NONZERO] -= 1
        if counts[a2] == 0:
            regs[R_D_NONZERO] += 1
            if ever_present[a2] == 0:
                ever_present[a2] = 1
                regs[R_FORCE_SNAP] = 1
        counts[a2] += 1
        counts[b] -= 1
        if counts[b] == 0:
            regs[R_D_NONZERO] -= 1
        if counts[b2] == 0:
            regs[R_D_NONZERO] += 1
            if ever_present[b2] == 0:
                ever_present[b2] = 1
                regs[R_FORCE_SNAP] = 1
        counts[b2] += 1

        # marker bookkeeping
        ma = marker_of[a]
        ma2 = marker_of[a2]
        mb = marker_of[b]
        mb2 = marker_of[b2]
        if ma != ma2:
            mcounts[ma] -= 1
            mcounts[ma2] += 1
            if ma2 > regs[R_MAXMARKER]:
                regs[R_MAXMARKER] = ma2
            if pred_kind == 1:
                if ma < pred_value and ma2 >= pred_value:
                    regs[R_COUNT_BELOW] -= 1
                elif ma >= pred_value and ma2 < pred_value:
                    regs[R_COUNT_BELOW] += 1
            if has_cross != 0:
                if ma2 > ma:
                    for v in range(ma + 1, ma2 + 1):
                        cum_ge[v] += 1
                        c = cum_ge[v]
                        if cross_plus[v] < 0 and c >= 1:
                            cross_plus[v] = interactions
                        if cross_01[v] < 0 and c >= thr01:
                            cross_01[v] = interactions
                        if cross_09[v] < 0 and c >= thr09:
                            cross_09[v] = interactions
                        if cross_0001[v] < 0 and c >= thr0001:
                            cross_0001[v] = interactions
                else:
                    for v in range(ma2 + 1, ma + 1):
                        cum_ge[v] -= 1
        if mb != mb2:
            mcounts[mb] -= 1
            mcounts[mb2] += 1
            if mb2 > regs[R_MAXMARKER]:
                regs[R_MAXMARKER] = mb2
            if pred_kind == 1:
                if mb < pred_value and mb2 >= pred_value:
                    regs[R_COUNT_BELOW] -= 1
                elif mb >= pred_value and mb2 < pred_value:
                    regs[R_COUNT_BELOW] += 1
            if has_cross != 0:
                if mb2 > mb:
                    for v in range(mb + 1, mb2 + 1):
                        cum_ge[v] += 1
                        c = cum_ge[v]
                        if cross_plus[v] < 0 and c >= 1:
                            cross_plus[v] = interactions
                        if cross_01[v] < 0 and c >= thr01:
                            cross_01[v] = interactions
                        if cross_09[v] < 0 and c >= thr09:
                            cross_09[v] = interactions
                        if cross_0001[v] < 0 and c >= thr0001:
                            cross_0001[v] = interactions
                else:
                    for v in range(mb2 + 1, mb + 1):
                        cum_ge[v] -= 1

        # output-class bookkeeping (stabilization index)
        if has_out != 0:
            oa = outclass_of[a]
            oa2 = outclass_of[a2]
            ob = outclass_of[b]
            ob2 = outclass_of[b2]
            if oa != oa2 or ob != ob2:
                if oa != oa2:
                    if oa >= 0:
                        outcounts[oa] -= 1
                    if oa2 >= 0:
                        outcounts[oa2] += 1
                if ob != ob2:
                    if ob >= 0:
                        outcounts[ob] -= 1
                    if ob2 >= 0:
                        outcounts[ob2] += 1
                for c in range(3):
                    if outcounts[c] == n:
                        if full_since[c] < 0:
                            full_since[c] = interactions
                    else:
                        full_since[c] = -1

        # exact mass accounting
        if has_mass != 0:
            old_mi = masses[i]
            old_mj = masses[j]
            ra = rule >> 2
            rb = rule & 3
            if ra == M_DET:
                nmi = mass_of[a2]
            elif ra == M_KEEP:
                nmi = old_mi
            elif ra == M_SUM:
                nmi = old_mi + old_mj
            else:
                nmi = int64(0)
            if rb == M_DET:
                nmj = mass_of[b2]
            elif rb == M_KEEP:
                nmj = old_mj
            elif rb == M_SUM:
                nmj = old_mi + old_mj
            else:
                nmj = int64(0)
            masses[i] = nmi
            masses[j] = nmj
            bad = 0
            if nmi + nmj != old_mi + old_mj:
                bad = 1
            if mass_of[a2] != MASS_UNDET and nmi != mass_of[a2]:
                bad = 1
            elif mass_hi[a2] > 0:
                v = nmi * mass_sign[a2]
                if v < mass_lo[a2] or v >= mass_hi[a2]:
                    bad = 1
            if mass_of[b2] != MASS_UNDET and nmj != mass_of[b2]:
                bad = 1
            elif mass_hi[b2] > 0:
                v = nmj * mass_sign[b2]
                if v < mass_lo[b2] or v >= mass_hi[b2]:
                    bad = 1
            if bad != 0:
                regs[R_MASS_VIOL] += 1
                if regs[R_MASS_FIRST] < 0:
                    regs[R_MASS_FIRST] = interactions

        # stop predicate
        if pred_kind != 0:
            hit = False
            if pred_kind == 1:
                hit = regs[R_COUNT_BELOW] == 0
            elif pred_kind == 2:
                hit = regs[R_MAXMARKER] >= pred_value
            elif pred_kind == 3:
                hit = mcounts[pred_value] >= pred_thresh
            elif pred_kind == 4:
                hit = mcounts[pred_value] <= pred_thresh
            if hit:
                regs[R_INTERACTIONS] = interactions
                regs[R_STREAK] = streak
                return ST_STOP_PRED
