"""Compiled single-trial loop used by the Monte Carlo harness.

This mirrors the pure-Python composition in ``harness._run_trial_reference``
step for step, consuming the per-trial random stream in exactly the same
order (rule draws first, then observation draws by ascending source index),
so the two paths produce bit-identical trials.  The kernel releases the GIL;
worker threads run disjoint trial ranges.

Codes (kept in sync with ``harness``):
  model kind: 0 gaussian, 1 exponential, 2 bernoulli
  variant:    0 known-count, 1 unbounded, 2 bounded
  rule:       0 independent marginals, 1 chernoff, 2 tandem,
              3 equalizing, 4 ordering
"""

import math

import numpy as np
from numba import njit

from ._rng import next_normal, next_uniform, stream_init

GAUSSIAN_CODE = 0
EXPONENTIAL_CODE = 1
BERNOULLI_CODE = 2

VARIANT_KNOWN = 0
VARIANT_UNBOUNDED = 1
VARIANT_BOUNDED = 2

RULE_INDEPENDENT = 0
RULE_CHERNOFF = 1
RULE_TANDEM = 2
RULE_EQUALIZING = 3
RULE_ORDERING = 4

_ONE = np.uint64(1)


@njit(cache=True, inline="always")
def _find_row(set_masks, mask):
    lo = 0
    hi = set_masks.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if set_masks[mid] < mask:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def run_trial_kernel(
    seed,
    trial_index,
    ell,
    uu,
    variant,
    a,
    b,
    c,
    d,
    kinds,
    par0,
    par1,
    g_slope,
    g_offset,
    truth_mask,
    rule_code,
    K_run,
    set_masks,
    c_table,
    xy_table,
    horizon,
    counts_out,
):
    M = kinds.shape[0]
    st = np.empty(1, np.uint64)
    st[0] = stream_init(seed, trial_index)
    lam = np.zeros(M)
    order = np.empty(M, np.int64)
    sampled = np.zeros(M, np.uint8)
    perm = np.empty(M, np.int64)
    for i in range(M):
        counts_out[i] = 0

    # decision before any data: all LLRs zero, ties resolve to low indices
    k0 = 0 if variant == VARIANT_UNBOUNDED else ell
    D_mask = np.uint64(0)
    for i in range(k0):
        D_mask |= _ONE << np.uint64(i)
    D_row = _find_row(set_masks, D_mask) if set_masks.shape[0] > 0 else 0

    last_neq = np.int64(0)
    stopped = False
    n = np.int64(0)
    while n < horizon:
        n += 1

        # ---- sampled set for this step
        for i in range(M):
            sampled[i] = 0
        if rule_code == RULE_INDEPENDENT:
            for i in range(M):
                un = next_uniform(st)
                if un < c_table[D_row, i]:
                    sampled[i] = 1
        elif rule_code == RULE_CHERNOFF:
            for i in range(M):
                perm[i] = i
            for i in range(M - 1, 0, -1):
                un = next_uniform(st)
                j = np.int64(un * (i + 1))
                if j > i:
                    j = i
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            U = next_uniform(st)
            cum = 0.0
            for t in range(M):
                src = perm[t]
                lo_edge = cum
                if t == M - 1:
                    cum = float(K_run)
                else:
                    cum = cum + c_table[D_row, src]
                if math.floor(cum - U) > math.floor(lo_edge - U):
                    sampled[src] = 1
        elif rule_code == RULE_TANDEM:
            start = ((n - 1) * K_run) % M
            for t in range(K_run):
                sampled[(start + t) % M] = 1
        elif rule_code == RULE_EQUALIZING:
            if n == 1:
                un = next_uniform(st)
                pick = np.int64(un * M)
                if pick >= M:
                    pick = M - 1
            else:
                xD = xy_table[D_row, 0]
                yD = xy_table[D_row, 1]
                pick = np.int64(0)
                best_dist = -1.0
                for i in range(M):
                    in_d = (D_mask >> np.uint64(i)) & _ONE
                    target = xD if in_d == _ONE else yD
                    dist = abs(counts_out[i] / (n - 1.0) - target)
                    if dist > best_dist:
                        pick = i
                        best_dist = dist
            sampled[pick] = 1
        else:  # RULE_ORDERING: K smallest |LLR|, ties to the smaller index
            for i in range(M):
                order[i] = i
            for i in range(1, M):
                key = order[i]
                kv = abs(lam[key])
                j = i - 1
                while j >= 0 and (
                    abs(lam[order[j]]) > kv
                    or (abs(lam[order[j]]) == kv and order[j] > key)
                ):
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = key
            for t in range(K_run):
                sampled[order[t]] = 1

        # ---- observations, ascending source index
        for i in range(M):
            if sampled[i] == 1:
                anom = ((truth_mask >> np.uint64(i)) & _ONE) == _ONE
                kind = kinds[i]
                if kind == GAUSSIAN_CODE:
                    z = next_normal(st)
                    x_obs = z + par0[i] if anom else z
                elif kind == EXPONENTIAL_CODE:
                    rate = par0[i] if anom else 1.0
                    x_obs = -math.log(next_uniform(st)) / rate
                else:
                    p = par1[i] if anom else par0[i]
                    x_obs = 1.0 if next_uniform(st) < p else 0.0
                lam[i] += g_slope[i] * x_obs + g_offset[i]
                counts_out[i] += 1

        # ---- descending order statistics, stable in the index
        for i in range(M):
            order[i] = i
        for i in range(1, M):
            key = order[i]
            kv = lam[key]
            j = i - 1
            while j >= 0 and (
                lam[order[j]] < kv or (lam[order[j]] == kv and order[j] > key)
            ):
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = key
        pos = 0
        for i in range(M):
            if lam[i] > 0.0:
                pos += 1

        # ---- decision
        if variant == VARIANT_KNOWN:
            kk = ell
        elif variant == VARIANT_UNBOUNDED:
            kk = pos
        else:
            kk = pos
            if kk < ell:
                kk = ell
            elif kk > uu:
                kk = uu
        D_mask = np.uint64(0)
        for t in range(kk):
            D_mask |= _ONE << np.uint64(order[t])
        if set_masks.shape[0] > 0:
            D_row = _find_row(set_masks, D_mask)
        if D_mask != truth_mask:
            last_neq = n

        # ---- stopping
        if variant == VARIANT_KNOWN:
            stop = lam[order[ell - 1]] - lam[order[ell]] >= c
        elif variant == VARIANT_UNBOUNDED:
            stop = True
            for i in range(M):
                if -a < lam[i] < b:
                    stop = False
                    break
        else:
            lam_l1 = lam[order[ell]]  # rank l+1; rank 0 gap is +inf
            gap_l = np.inf if ell == 0 else lam[order[ell - 1]] - lam_l1
            b1 = lam_l1 <= -a and gap_l >= c
            b2 = ell <= pos <= uu
            if b2:
                for i in range(M):
                    if -a < lam[i] < b:
                        b2 = False
                        break
            lam_u = lam[order[uu - 1]]
            gap_u = np.inf if uu == M else lam_u - lam[order[uu]]
            b3 = lam_u >= b and gap_u >= d
            stop = b1 or b2 or b3
        if stop:
            stopped = True
            break

    elapsed = n if stopped else horizon
    if D_mask == truth_mask:
        sigma = last_neq + np.int64(1)
    else:
        sigma = np.int64(-1)
    return elapsed, np.int64(1 if stopped else 0), D_mask, sigma
