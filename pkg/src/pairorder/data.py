"""Tokenization, corpus I/O, seeded shuffling, and synthetic corpus
generation.

Tokenization is plain whitespace splitting: the synthetic vocabularies are
engineered, so subword modeling would add nothing at this scale.  The two
corpus kinds differ in what a pair of sentences reveals:

* ``drift``: sentence k draws from vocabulary band k (with overlap bleed),
  so the relative order of a pair is inferable from the pair alone.
* ``cyclic``: each paragraph draws a secret offset o and sentence k draws
  from band (o + k) mod B.  With n < B the offset is recoverable from the
  whole paragraph but not from a single pair, so paragraph-level context
  carries measurable signal that a purely local classifier cannot use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from pairorder.core import Ordering, Paragraph, ShuffleRecord, derive_seed, shuffle

PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
RESERVED = (("[PAD]", PAD_ID), ("[UNK]", UNK_ID), ("[CLS]", CLS_ID), ("[SEP]", SEP_ID))
N_RESERVED = len(RESERVED)


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.token_to_id) + N_RESERVED

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    @classmethod
    def build(cls, sentences, cap: int | None = None) -> "Vocab":
        """Frequency-sorted whitespace vocabulary; ties break alphabetically."""
        counts: dict[str, int] = {}
        for s in sentences:
            for tok in s.split():
                counts[tok] = counts.get(tok, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if cap is not None:
            ranked = ranked[:cap]
        return cls({tok: N_RESERVED + i for i, (tok, _) in enumerate(ranked)})

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok, i in RESERVED:
                fh.write(f"{tok}\t{i}\n")
            for tok, i in sorted(self.token_to_id.items(), key=lambda kv: kv[1]):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        mapping: dict[str, int] = {}
        reserved = dict(RESERVED)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                tok, i = line.rstrip("\n").split("\t")
                i = int(i)
                if tok in reserved:
                    if reserved[tok] != i:
                        raise ValueError(f"{path}: reserved token {tok} has id {i}")
                    continue
                mapping[tok] = i
        return cls(mapping)


@dataclass(frozen=True)
class PairEncoding:
    """Token ids for [CLS] s_i [SEP] s_j [SEP] with segment ids and the token
    spans (start, stop) covering each sentence's own tokens."""

    ids: tuple[int, ...]
    segments: tuple[int, ...]
    span_i: tuple[int, int]
    span_j: tuple[int, int]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class SingleEncoding:
    """Token ids for [CLS] s [SEP], all segment 0."""

    ids: tuple[int, ...]
    segments: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


MIN_PAIR_LEN = 5  # CLS + one token + SEP + one token + SEP


def tokenize_pair(vocab: Vocab, s_i: str, s_j: str, max_len: int) -> PairEncoding:
    """Encode a sentence pair, truncating the longer sentence token by token
    (ties truncate the second) until the sequence fits."""
    if max_len < MIN_PAIR_LEN:
        raise ValueError(f"max_len={max_len} cannot hold two sentences plus specials")
    ti = s_i.split()
    tj = s_j.split()
    if not ti or not tj:
        raise ValueError("cannot tokenize an empty sentence")
    while 3 + len(ti) + len(tj) > max_len:
        if len(ti) > len(tj):
            ti.pop()
        else:
            tj.pop()
    ids = [CLS_ID] + [vocab.id(t) for t in ti] + [SEP_ID] + [vocab.id(t) for t in tj] + [SEP_ID]
    li, lj = len(ti), len(tj)
    segments = [0] * (li + 2) + [1] * (lj + 1)
    return PairEncoding(
        ids=tuple(ids),
        segments=tuple(segments),
        span_i=(1, 1 + li),
        span_j=(2 + li, 2 + li + lj),
    )


def tokenize_single(vocab: Vocab, s: str, max_len: int) -> SingleEncoding:
    if max_len < 3:
        raise ValueError(f"max_len={max_len} cannot hold one sentence plus specials")
    toks = s.split()
    if not toks:
        raise ValueError("cannot tokenize an empty sentence")
    toks = toks[: max_len - 2]
    ids = [CLS_ID] + [vocab.id(t) for t in toks] + [SEP_ID]
    return SingleEncoding(ids=tuple(ids), segments=tuple([0] * len(ids)))


@dataclass(frozen=True)
class SynthConfig:
    kind: str = "drift"  # or "cyclic"
    n_sentences: tuple[int, int] = (5, 5)
    tokens_per_sentence: tuple[int, int] = (3, 8)
    vocab_bands: int = 6
    band_overlap: float = 0.0
    offset_range: tuple[int, int] | None = None  # cyclic only; default (0, vocab_bands)
    band_tokens: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("drift", "cyclic"):
            raise ValueError(f"unknown corpus kind {self.kind!r}")
        lo, hi = self.n_sentences
        if not 1 <= lo <= hi:
            raise ValueError(f"bad n_sentences range {self.n_sentences}")
        tlo, thi = self.tokens_per_sentence
        if not 1 <= tlo <= thi:
            raise ValueError(f"bad tokens_per_sentence range {self.tokens_per_sentence}")
        if not 0.0 <= self.band_overlap < 1.0:
            raise ValueError("band_overlap must be in [0, 1)")
        if self.kind == "drift" and self.vocab_bands < hi:
            raise ValueError(
                f"drift corpus needs at least as many bands ({self.vocab_bands}) "
                f"as the longest paragraph ({hi})"
            )
        if self.vocab_bands < 1 or self.band_tokens < 1:
            raise ValueError("vocab_bands and band_tokens must be positive")


def band_word(band: int, tok: int) -> str:
    return f"b{band:02d}w{tok:02d}"


def word_band(token: str) -> int:
    """Inverse of :func:`band_word`; the analytic band-lookup oracle."""
    return int(token[1:3])


def _sentence(rng: np.random.Generator, cfg: SynthConfig, band: int) -> str:
    count = int(rng.integers(cfg.tokens_per_sentence[0], cfg.tokens_per_sentence[1] + 1))
    words = []
    for _ in range(count):
        b = band
        if cfg.band_overlap > 0 and rng.random() < cfg.band_overlap:
            step = 1 if rng.random() < 0.5 else -1
            if cfg.kind == "cyclic":
                b = (band + step) % cfg.vocab_bands
            else:
                b = min(max(band + step, 0), cfg.vocab_bands - 1)
        words.append(band_word(b, int(rng.integers(cfg.band_tokens))))
    return " ".join(words)


def gen_synthetic(cfg: SynthConfig, count: int) -> list[Paragraph]:
    """Deterministic synthetic corpus: same config, same bytes."""
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.n_sentences
    off_lo, off_hi = cfg.offset_range if cfg.offset_range is not None else (0, cfg.vocab_bands)
    out = []
    for idx in range(count):
        n = int(rng.integers(lo, hi + 1))
        if cfg.kind == "cyclic":
            offset = int(rng.integers(off_lo, off_hi))
            bands = [(offset + k) % cfg.vocab_bands for k in range(n)]
        else:
            bands = list(range(n))
        sentences = [_sentence(rng, cfg, b) for b in bands]
        out.append(Paragraph(f"{cfg.kind}-{idx:05d}", sentences))
    return out


def shuffle_corpus(paragraphs: list[Paragraph], seed: int) -> list[ShuffleRecord]:
    """One seeded shuffle per paragraph, each with its own derived seed."""
    return [shuffle(p, derive_seed(seed, f"shuffle:{p.id}"))[1] for p in paragraphs]


def shuffled_sentences(paragraph: Paragraph, record: ShuffleRecord) -> list[str]:
    if record.paragraph_id != paragraph.id or record.n != paragraph.n:
        raise ValueError(f"shuffle record does not match paragraph {paragraph.id!r}")
    return [paragraph.sentences[g] for g in record.perm]


@dataclass(frozen=True)
class PairExample:
    """Ordered pair (i, j) of shuffled indices; label 1 iff i precedes j in
    gold order.  Exactly balanced by construction."""

    pid: str
    i: int
    j: int
    label: int


def make_pair_dataset(paragraphs: list[Paragraph], records: list[ShuffleRecord]) -> list[PairExample]:
    by_id = {r.paragraph_id: r for r in records}
    out = []
    for p in paragraphs:
        rec = by_id.get(p.id)
        if rec is None:
            raise ValueError(f"no shuffle record for paragraph {p.id!r}")
        gold_rank = rec.perm  # perm[k] = gold position of shuffled sentence k
        for i in range(p.n):
            for j in range(p.n):
                if i != j:
                    out.append(PairExample(p.id, i, j, int(gold_rank[i] < gold_rank[j])))
    return out


# ---------------------------------------------------------------------------
# file formats (JSON Lines unless noted)

def write_corpus(path, paragraphs: list[Paragraph]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in paragraphs:
            fh.write(json.dumps({"id": p.id, "sentences": list(p.sentences)}, ensure_ascii=False) + "\n")


def read_corpus(path) -> list[Paragraph]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(Paragraph(obj["id"], obj["sentences"]))
    ids = [p.id for p in out]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate paragraph ids")
    return out


def write_shuffles(path, records: list[ShuffleRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({"paragraph_id": r.paragraph_id, "perm": list(r.perm), "seed": r.seed}) + "\n")


def read_shuffles(path) -> list[ShuffleRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(ShuffleRecord(obj["paragraph_id"], obj["perm"], obj["seed"]))
    return out


def write_pairs(path, examples: list[PairExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in examples:
            fh.write(json.dumps({"pid": e.pid, "i": e.i, "j": e.j, "label": e.label}) + "\n")


def read_pairs(path) -> list[PairExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(PairExample(obj["pid"], int(obj["i"]), int(obj["j"]), int(obj["label"])))
    return out


def write_orderings(path, items: list[tuple[str, Ordering]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pid, ordering in items:
            fh.write(json.dumps({"paragraph_id": pid, "positions": list(ordering.positions)}) + "\n")


def read_orderings(path) -> list[tuple[str, Ordering]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append((obj["paragraph_id"], Ordering(obj["positions"])))
    return out
