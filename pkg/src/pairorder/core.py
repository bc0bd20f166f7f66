"""Shared value types: paragraphs, shuffle records, orderings, score matrices.

Everything here is immutable after construction and safe to share across
workers.  Sentences are kept as raw strings; tokenization lives in
:mod:`pairorder.data` so that decoding and metrics stay usable on score
matrices from any source.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np


def derive_seed(seed: int, tag: str) -> int:
    """Derive a stable 63-bit sub-seed from a base seed and a role tag.

    Uses blake2b so the fan-out is reproducible across processes and
    platforms (unlike the builtin ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode("ascii"))
    h.update(b"\x00")
    h.update(tag.encode("utf-8"))
    return int.from_bytes(h.digest(), "little") & 0x7FFF_FFFF_FFFF_FFFF


@dataclass(frozen=True)
class Paragraph:
    """An identified list of sentences in gold order."""

    id: str
    sentences: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.id:
            raise ValueError("paragraph id must be non-empty")
        if len(self.sentences) < 1:
            raise ValueError(f"paragraph {self.id!r} has no sentences")
        for k, s in enumerate(self.sentences):
            if not s.strip():
                raise ValueError(f"paragraph {self.id!r}: sentence {k} is empty")

    @property
    def n(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class ShuffleRecord:
    """Permutation applied to a paragraph: ``perm[k]`` is the gold index of
    the sentence sitting at shuffled slot ``k``."""

    paragraph_id: str
    perm: tuple[int, ...]
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        object.__setattr__(self, "seed", int(self.seed))
        _check_bijection(self.perm, f"shuffle record for {self.paragraph_id!r}")

    @property
    def n(self) -> int:
        return len(self.perm)


@dataclass(frozen=True)
class Ordering:
    """A predicted order: ``positions[k]`` is the shuffled index of the
    sentence placed at rank ``k``."""

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", tuple(int(p) for p in self.positions))
        _check_bijection(self.positions, "ordering")

    @property
    def n(self) -> int:
        return len(self.positions)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=np.int64)


def _check_bijection(values: tuple[int, ...], what: str) -> None:
    n = len(values)
    if n < 1:
        raise ValueError(f"{what}: empty permutation")
    seen = [False] * n
    for v in values:
        if not 0 <= v < n or seen[v]:
            raise ValueError(f"{what}: {values!r} is not a permutation of 0..{n - 1}")
        seen[v] = True


def shuffle(paragraph: Paragraph, seed: int) -> tuple[list[str], ShuffleRecord]:
    """Deterministically shuffle a paragraph's sentences (Fisher-Yates)."""
    n = paragraph.n
    perm = list(range(n))
    rng = np.random.default_rng(seed)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    shuffled = [paragraph.sentences[g] for g in perm]
    return shuffled, ShuffleRecord(paragraph.id, perm, seed)


def gold_ordering(record: ShuffleRecord) -> Ordering:
    """The ordering that restores gold order when applied to the shuffled list."""
    inv = [0] * record.n
    for k, g in enumerate(record.perm):
        inv[g] = k
    return Ordering(inv)


def apply_ordering(ordering: Ordering, items: list) -> list:
    if len(items) != ordering.n:
        raise ValueError(f"ordering has n={ordering.n}, got {len(items)} items")
    return [items[k] for k in ordering.positions]


class PairScoreMatrix:
    """N x N matrix of ``p[i][j] = P(sentence i precedes sentence j)``.

    The diagonal is undefined and stored as NaN; reading it through
    :meth:`get` raises.  The two directions of a pair are recorded
    independently and never symmetrized.
    """

    __slots__ = ("paragraph_id", "n", "p")

    def __init__(self, paragraph_id: str, p: np.ndarray) -> None:
        p = np.array(p, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ValueError(f"score matrix for {paragraph_id!r}: bad shape {p.shape}")
        n = p.shape[0]
        off = ~np.eye(n, dtype=bool)
        vals = p[off]
        if not np.all(np.isfinite(vals)) or vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError(f"score matrix for {paragraph_id!r}: entries outside [0, 1]")
        np.fill_diagonal(p, np.nan)
        p.flags.writeable = False
        self.paragraph_id = paragraph_id
        self.n = n
        self.p = p

    def get(self, i: int, j: int) -> float:
        if i == j:
            raise ValueError(f"p[{i}][{i}] is undefined (diagonal read)")
        return float(self.p[i, j])

    def to_json_dict(self) -> dict:
        rows = [[None if i == j else self.p[i, j] for j in range(self.n)] for i in range(self.n)]
        return {"paragraph_id": self.paragraph_id, "n": self.n, "p": rows}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PairScoreMatrix":
        n = int(obj["n"])
        rows = obj["p"]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"score matrix for {obj.get('paragraph_id')!r}: p is not {n}x{n}")
        p = np.array([[np.nan if v is None else float(v) for v in row] for row in rows])
        return cls(str(obj["paragraph_id"]), p)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "PairScoreMatrix":
        return cls.from_json_dict(json.loads(text))


def matrix_from_ordering(paragraph_id: str, gold: Ordering, hi: float = 1.0, lo: float = 0.0) -> PairScoreMatrix:
    """The noise-free matrix implied by a gold ordering: ``p[i][j] = hi``
    exactly when i precedes j."""
    n = gold.n
    rank = np.empty(n, dtype=np.int64)
    for r, s in enumerate(gold.positions):
        rank[s] = r
    p = np.where(rank[:, None] < rank[None, :], hi, lo).astype(np.float64)
    return PairScoreMatrix(paragraph_id, p)
