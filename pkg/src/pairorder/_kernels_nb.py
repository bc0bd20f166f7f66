"""Numba-compiled twins of the kernels in :mod:`pairorder._kernels_np`.

No fastmath and no parallel reductions: additions happen one term at a time
in (step, placed-index) order so results are bit-identical to the numpy
fallback, and beam scores match exhaustive-oracle scores exactly.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def inversion_count(seq):
    n = seq.shape[0]
    inv = 0
    for i in range(n):
        for j in range(i + 1, n):
            if seq[i] > seq[j]:
                inv += 1
    return inv


@njit(cache=True)
def pairwise_hits(p, gold_rank):
    n = gold_rank.shape[0]
    hits = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if gold_rank[i] < gold_rank[j]:
                if p[i, j] > 0.5:
                    hits += 1
            else:
                if p[i, j] < 0.5:
                    hits += 1
    return hits


@njit(cache=True)
def score_full(S, perm, allpairs):
    n = perm.shape[0]
    sc = 0.0
    if allpairs:
        for t in range(1, n):
            for i in range(t):
                sc += S[perm[i], perm[t]]
    else:
        for t in range(1, n):
            sc += S[perm[t - 1], perm[t]]
    return sc


@njit(cache=True)
def exhaustive_best(S, allpairs):
    n = S.shape[0]
    perm = np.arange(n)
    best_perm = perm.copy()
    best_score = -np.inf
    while True:
        sc = 0.0
        if allpairs:
            for t in range(1, n):
                for i in range(t):
                    sc += S[perm[i], perm[t]]
        else:
            for t in range(1, n):
                sc += S[perm[t - 1], perm[t]]
        if sc > best_score:
            best_score = sc
            best_perm[:] = perm
        # advance to the next permutation in lexicographic order
        i = n - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            break
        j = n - 1
        while perm[j] <= perm[i]:
            j -= 1
        perm[i], perm[j] = perm[j], perm[i]
        lo = i + 1
        hi = n - 1
        while lo < hi:
            perm[lo], perm[hi] = perm[hi], perm[lo]
            lo += 1
            hi -= 1
    return best_perm, best_score


@njit(cache=True)
def beam_search(S, beam_width, allpairs):
    n = S.shape[0]
    width = n if n > beam_width else beam_width
    cur_pref = np.zeros((width, n), dtype=np.int64)
    cur_used = np.zeros(width, dtype=np.int64)
    cur_score = np.zeros(width, dtype=np.float64)
    for c in range(n):
        cur_pref[c, 0] = c
        cur_used[c] = 1 << c
    cur_len = n

    cap = width * n
    ch_pref = np.zeros((cap, n), dtype=np.int64)
    ch_used = np.zeros(cap, dtype=np.int64)
    ch_score = np.zeros(cap, dtype=np.float64)
    nx_pref = np.zeros((width, n), dtype=np.int64)
    nx_used = np.zeros(width, dtype=np.int64)
    nx_score = np.zeros(width, dtype=np.float64)

    for t in range(1, n):
        # expand: beam is stored in lex order and v runs ascending, so
        # children are generated in lex order of their prefixes
        m = 0
        for c in range(cur_len):
            for v in range(n):
                if cur_used[c] & (1 << v):
                    continue
                sc = cur_score[c]
                if allpairs:
                    for i in range(t):
                        sc += S[cur_pref[c, i], v]
                else:
                    sc += S[cur_pref[c, t - 1], v]
                for i in range(t):
                    ch_pref[m, i] = cur_pref[c, i]
                ch_pref[m, t] = v
                ch_used[m] = cur_used[c] | (1 << v)
                ch_score[m] = sc
                m += 1
        # keep top beam_width by score; ties go to the earlier (lex smaller)
        # child, selected in one index-order pass so the beam stays lex-sorted
        k = beam_width if beam_width < m else m
        take_all = k == m
        thr = -np.inf
        budget = 0
        if not take_all:
            srt = np.sort(ch_score[:m])
            thr = srt[m - k]
            greater = 0
            for i in range(m):
                if ch_score[i] > thr:
                    greater += 1
            budget = k - greater
        idx = 0
        for i in range(m):
            sc = ch_score[i]
            take = take_all or sc > thr
            if not take and sc == thr and budget > 0:
                take = True
                budget -= 1
            if take:
                for q in range(t + 1):
                    nx_pref[idx, q] = ch_pref[i, q]
                nx_used[idx] = ch_used[i]
                nx_score[idx] = sc
                idx += 1
        cur_len = idx
        cur_pref, nx_pref = nx_pref, cur_pref
        cur_used, nx_used = nx_used, cur_used
        cur_score, nx_score = nx_score, cur_score

    best = 0
    for c in range(1, cur_len):
        if cur_score[c] > cur_score[best]:
            best = c
    return cur_pref[best, :n].copy(), cur_score[best]
