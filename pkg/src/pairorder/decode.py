"""Turning a pairwise score matrix into an ordering.

Two beam strategies are provided:

* ``adjacent``   (strategy 1): extending a prefix adds only the score of the
  last placed sentence against the new one; a full permutation touches the
  matrix n - 1 times.
* ``all-pairs``  (strategy 2): extending adds the new sentence's score
  against every sentence already placed; a full permutation touches the
  matrix C(n, 2) times.

Scores are added in probability space by default; log space (with the
probabilities clamped at ``epsilon``) gives the product interpretation.
Everything is deterministic: ties break toward the lexicographically
smaller prefix.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np

from pairorder import kernels
from pairorder.core import Ordering, PairScoreMatrix

STRATEGIES = ("adjacent", "all-pairs")
SCORE_SPACES = ("probability", "log")

ORACLE_MAX_N = 9
BEAM_MAX_N = 63  # used-set bitmask width in the numba kernel


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str = "adjacent"
    beam_width: int = 64
    score_space: str = "probability"
    epsilon: float = 1e-12

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.score_space not in SCORE_SPACES:
            raise ValueError(f"unknown score space {self.score_space!r}; expected one of {SCORE_SPACES}")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def score_array(matrix: PairScoreMatrix, score_space: str, epsilon: float = 1e-12) -> np.ndarray:
    """Copy of the matrix in the requested score space.  The NaN diagonal is
    preserved; decoders never read it."""
    if score_space == "probability":
        return np.array(matrix.p, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.log(np.maximum(matrix.p, epsilon))


class CountingMatrix:
    """Score lookup wrapper that counts how often it is consulted."""

    def __init__(self, p: np.ndarray) -> None:
        self.p = np.asarray(p, dtype=np.float64)
        self.calls = 0

    def __call__(self, i: int, j: int) -> float:
        self.calls += 1
        return float(self.p[i, j])


def score_permutation(scores, perm, strategy: str, score_space: str = "probability",
                      epsilon: float = 1e-12) -> float:
    """Recompute a full permutation's score from scratch.

    ``scores`` may be an (n, n) array or a callable (i, j) -> p, e.g. a
    :class:`CountingMatrix`.  Accumulation order matches the beam kernels,
    so recomputed totals equal accumulated candidate scores exactly.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    perm = np.asarray(perm, dtype=np.int64)
    if callable(scores):
        lookup = scores
    else:
        arr = np.asarray(scores, dtype=np.float64)
        lookup = lambda i, j: float(arr[i, j])
    if score_space == "log":
        raw = lookup
        lookup = lambda i, j: math.log(max(raw(i, j), epsilon))
    n = len(perm)
    total = 0.0
    if strategy == "all-pairs":
        for t in range(1, n):
            for i in range(t):
                total += lookup(perm[i], perm[t])
    else:
        for t in range(1, n):
            total += lookup(perm[t - 1], perm[t])
    return total


def beam_decode(matrix: PairScoreMatrix, cfg: DecodeConfig) -> Ordering:
    """Beam search over permutations; returns the best complete candidate."""
    return beam_decode_scored(matrix, cfg)[0]


def beam_decode_scored(matrix: PairScoreMatrix, cfg: DecodeConfig) -> tuple[Ordering, float]:
    """Like :func:`beam_decode` but also returns the accumulated score."""
    n = matrix.n
    if n > BEAM_MAX_N:
        raise ValueError(f"beam decoding supports n <= {BEAM_MAX_N}, got {n}")
    if cfg.beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if n == 1:
        return Ordering((0,)), 0.0
    S = score_array(matrix, cfg.score_space, cfg.epsilon)
    perm, score = kernels.beam_search(S, cfg.beam_width, cfg.strategy == "all-pairs")
    return Ordering(perm), float(score)


def oracle_decode(matrix: PairScoreMatrix, strategy: str, score_space: str = "probability",
                  epsilon: float = 1e-12) -> tuple[Ordering, float]:
    """Exhaustive argmax over all n! permutations (n <= 9), lexicographic
    tie-break.  The verification oracle for the beam strategies."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    n = matrix.n
    if n > ORACLE_MAX_N:
        raise ValueError(f"oracle decoding is factorial; n <= {ORACLE_MAX_N} required, got {n}")
    if n == 1:
        return Ordering((0,)), 0.0
    S = score_array(matrix, score_space, epsilon)
    perm, score = kernels.exhaustive_best(S, strategy == "all-pairs")
    return Ordering(perm), float(score)


def topo_decode(matrix: PairScoreMatrix) -> Ordering:
    """Tournament baseline: edge i -> j when p[i][j] > 0.5 (ties resolved by
    index order), nodes sorted by descending out-degree (Copeland score) with
    ascending incoming probability mass as the secondary key.  Equals the
    topological sort whenever the tournament is acyclic."""
    n = matrix.n
    if n == 1:
        return Ordering((0,))
    p = matrix.p
    off = ~np.eye(n, dtype=bool)
    iwin = (p > 0.5) | ((p == 0.5) & (np.arange(n)[:, None] < np.arange(n)[None, :]))
    wins = (iwin & off).sum(axis=1)
    in_strength = np.where(off, p, 0.0).sum(axis=0)
    order = np.lexsort((np.arange(n), in_strength, -wins))
    return Ordering(order)


def decode_corpus(matrices: Iterable[PairScoreMatrix], cfg: DecodeConfig,
                  decoder: str = "beam") -> Iterator[tuple[str, Ordering]]:
    """Map a decoder over a corpus, preserving input order.  Failures are
    re-raised with the offending paragraph id attached."""
    for matrix in matrices:
        try:
            if decoder == "beam":
                ordering = beam_decode(matrix, cfg)
            elif decoder == "topo":
                ordering = topo_decode(matrix)
            else:
                raise ValueError(f"unknown decoder {decoder!r}")
        except ValueError as exc:
            raise ValueError(f"paragraph {matrix.paragraph_id!r}: {exc}") from exc
        yield matrix.paragraph_id, ordering
