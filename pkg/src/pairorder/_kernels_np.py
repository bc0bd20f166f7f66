"""Pure-numpy implementations of the hot decoding/counting kernels.

These are the fallback path when numba is disabled (``ORD_NUMBA=0``) or
unavailable.  Floating-point accumulation order is identical to the numba
twins in :mod:`pairorder._kernels_nb`: scores grow one term at a time in
(step, placed-index) order, so both backends produce bit-identical results.
"""

from __future__ import annotations

import itertools

import numpy as np


def inversion_count(seq: np.ndarray) -> int:
    """Number of pairs (i, j), i < j, with seq[i] > seq[j]."""
    a = np.asarray(seq)
    if a.size < 2:
        return 0
    gt = a[:, None] > a[None, :]
    return int(np.triu(gt, k=1).sum())


def pairwise_hits(p: np.ndarray, gold_rank: np.ndarray) -> int:
    """Count ordered pairs (i, j), i != j, where thresholding p at 0.5 agrees
    with the gold relative order.  p == 0.5 never counts as a hit."""
    before = gold_rank[:, None] < gold_rank[None, :]
    hit = np.where(before, p > 0.5, p < 0.5)
    np.fill_diagonal(hit, False)
    return int(hit.sum())


def score_full(S: np.ndarray, perm: np.ndarray, allpairs: bool) -> float:
    """Total strategy score of one complete permutation.

    Accumulates serially in the same order the beam uses, so recomputed
    scores match accumulated candidate scores exactly.
    """
    n = len(perm)
    sc = 0.0
    if allpairs:
        for t in range(1, n):
            for i in range(t):
                sc += S[perm[i], perm[t]]
    else:
        for t in range(1, n):
            sc += S[perm[t - 1], perm[t]]
    return sc


def exhaustive_best(S: np.ndarray, allpairs: bool) -> tuple[np.ndarray, float]:
    """Argmax over all n! permutations; ties resolved to the lexicographically
    smallest permutation.  Guarded by the caller to small n."""
    n = S.shape[0]
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    score = np.zeros(len(perms), dtype=np.float64)
    if allpairs:
        for t in range(1, n):
            for i in range(t):
                score += S[perms[:, i], perms[:, t]]
    else:
        for t in range(1, n):
            score += S[perms[:, t - 1], perms[:, t]]
    b = int(np.argmax(score))
    return perms[b].copy(), float(score[b])


def beam_search(S: np.ndarray, beam_width: int, allpairs: bool) -> tuple[np.ndarray, float]:
    """Beam search over permutations of 0..n-1.

    The beam starts with all n single-element prefixes at score 0.  Each step
    extends every candidate with every unused element and keeps the top
    ``beam_width`` children by score, breaking ties toward the
    lexicographically smaller prefix.  The stored beam stays in lexicographic
    order, which makes the tie-break a plain first-come rule.
    """
    n = S.shape[0]
    pref = np.arange(n, dtype=np.int64)[:, None]
    used = np.eye(n, dtype=bool)
    score = np.zeros(n, dtype=np.float64)
    for t in range(1, n):
        # np.nonzero walks row-major: candidates in beam (lex) order, each
        # extended by ascending v, so children come out in lex order too.
        cand, vs = np.nonzero(~used)
        child_pref = np.concatenate([pref[cand], vs[:, None]], axis=1)
        child_used = used[cand]
        child_used[np.arange(len(vs)), vs] = True
        if allpairs:
            child_score = score[cand].copy()
            for i in range(t):
                child_score += S[child_pref[:, i], vs]
        else:
            child_score = score[cand] + S[child_pref[:, t - 1], vs]
        m = len(child_score)
        k = min(beam_width, m)
        if k < m:
            thr = np.partition(child_score, m - k)[m - k]
            keep = child_score > thr
            budget = k - int(keep.sum())
            ties = np.nonzero(child_score == thr)[0][:budget]
            keep[ties] = True
            pref, used, score = child_pref[keep], child_used[keep], child_score[keep]
        else:
            pref, used, score = child_pref, child_used, child_score
    best = int(np.argmax(score))
    return pref[best].copy(), float(score[best])
