"""Ordering evaluation metrics: positional accuracy, Kendall's tau, perfect
match ratio, and pairwise classification accuracy, with corpus aggregation.

Conventions chosen where the source formulas are silent:

* n = 1 paragraphs score acc = tau = 1.0 and count as perfect (the tau
  denominator C(1, 2) is zero, but a single sentence is trivially ordered).
* A pairwise probability of exactly 0.5 is a miss in both directions.
* The reported pairwise std is the population standard deviation across
  paragraphs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from pairorder import kernels
from pairorder.core import Ordering, PairScoreMatrix


def _positions(o) -> np.ndarray:
    if isinstance(o, Ordering):
        return o.as_array()
    return np.asarray(o, dtype=np.int64)


def _check_same_n(pred: np.ndarray, gold: np.ndarray) -> int:
    if pred.shape != gold.shape:
        raise ValueError(f"length mismatch: pred n={pred.shape[0]}, gold n={gold.shape[0]}")
    return pred.shape[0]


def accuracy(pred, gold) -> float:
    """Fraction of ranks holding the same sentence in pred and gold."""
    p, g = _positions(pred), _positions(gold)
    n = _check_same_n(p, g)
    return int((p == g).sum()) / n


def rank_of(gold) -> np.ndarray:
    """rank_of(gold)[s] = the rank gold assigns to shuffled sentence s."""
    g = _positions(gold)
    rank = np.empty_like(g)
    rank[g] = np.arange(len(g), dtype=np.int64)
    return rank


def kendall_tau(pred, gold) -> float:
    """1 - 2 * inversions / C(n, 2); 1.0 for n = 1."""
    p, g = _positions(pred), _positions(gold)
    n = _check_same_n(p, g)
    if n == 1:
        return 1.0
    seq = rank_of(g)[p]
    inv = int(kernels.inversion_count(seq))
    pairs = n * (n - 1) // 2
    return 1.0 - 2.0 * inv / pairs


@dataclass(frozen=True)
class ParagraphScores:
    acc: float
    tau: float
    perfect: bool
    n: int
    pair_acc: float | None = None


def score_paragraph(pred, gold, matrix: PairScoreMatrix | None = None) -> ParagraphScores:
    p, g = _positions(pred), _positions(gold)
    n = _check_same_n(p, g)
    acc = accuracy(p, g)
    tau = kendall_tau(p, g)
    pacc = None
    if matrix is not None and n >= 2:
        pacc = pairwise_accuracy(matrix, gold)
    return ParagraphScores(acc=acc, tau=tau, perfect=bool(acc == 1.0), n=n, pair_acc=pacc)


def pmr(scores: list[ParagraphScores]) -> float:
    """Fraction of paragraphs whose predicted order matches gold exactly."""
    if not scores:
        raise ValueError("pmr of an empty corpus is undefined")
    return sum(1 for s in scores if s.perfect) / len(scores)


def pairwise_accuracy(matrix: PairScoreMatrix, gold) -> float:
    """Fraction of the N(N-1) ordered pairs classified correctly at the 0.5
    threshold.  p == 0.5 counts as incorrect."""
    g = _positions(gold)
    if matrix.n != len(g):
        raise ValueError(f"matrix n={matrix.n} but ordering n={len(g)}")
    n = matrix.n
    if n < 2:
        raise ValueError("pairwise accuracy needs n >= 2")
    hits = int(kernels.pairwise_hits(matrix.p, rank_of(g)))
    return hits / (n * (n - 1))


@dataclass(frozen=True)
class EvalReport:
    per_paragraph: tuple[ParagraphScores, ...]
    paragraph_ids: tuple[str, ...]
    acc_mean: float
    tau_mean: float
    pmr: float
    pairwise_acc_mean: float | None = None
    pairwise_acc_std: float | None = None
    family: str | None = None
    strategy: str | None = None
    corpus: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "strategy": self.strategy,
            "corpus": self.corpus,
            "acc_mean": self.acc_mean,
            "tau_mean": self.tau_mean,
            "pmr": self.pmr,
            "pairwise_acc_mean": self.pairwise_acc_mean,
            "pairwise_acc_std": self.pairwise_acc_std,
            "per_paragraph": [
                {
                    "paragraph_id": pid,
                    "n": s.n,
                    "acc": s.acc,
                    "tau": s.tau,
                    "perfect": s.perfect,
                    "pair_acc": s.pair_acc,
                }
                for pid, s in zip(self.paragraph_ids, self.per_paragraph)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EvalReport":
        rows = obj["per_paragraph"]
        scores = tuple(
            ParagraphScores(
                acc=r["acc"], tau=r["tau"], perfect=r["perfect"], n=r["n"], pair_acc=r.get("pair_acc")
            )
            for r in rows
        )
        return cls(
            per_paragraph=scores,
            paragraph_ids=tuple(r["paragraph_id"] for r in rows),
            acc_mean=obj["acc_mean"],
            tau_mean=obj["tau_mean"],
            pmr=obj["pmr"],
            pairwise_acc_mean=obj.get("pairwise_acc_mean"),
            pairwise_acc_std=obj.get("pairwise_acc_std"),
            family=obj.get("family"),
            strategy=obj.get("strategy"),
            corpus=obj.get("corpus"),
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["paragraph_id", "n", "acc", "tau", "perfect", "pair_acc"])
            for pid, s in zip(self.paragraph_ids, self.per_paragraph):
                w.writerow([pid, s.n, s.acc, s.tau, int(s.perfect), "" if s.pair_acc is None else s.pair_acc])
            w.writerow(
                [
                    "SUMMARY",
                    len(self.per_paragraph),
                    self.acc_mean,
                    self.tau_mean,
                    self.pmr,
                    "" if self.pairwise_acc_mean is None else self.pairwise_acc_mean,
                ]
            )


def aggregate(
    scores: list[ParagraphScores],
    paragraph_ids: list[str],
    family: str | None = None,
    strategy: str | None = None,
    corpus: str | None = None,
) -> EvalReport:
    """Arithmetic means of the per-paragraph values plus the perfect-match
    fraction; pairwise mean/std only when every paragraph carries one."""
    if not scores:
        raise ValueError("cannot aggregate an empty corpus")
    if len(scores) != len(paragraph_ids):
        raise ValueError("scores and paragraph ids differ in length")
    accs = np.array([s.acc for s in scores])
    taus = np.array([s.tau for s in scores])
    paccs = [s.pair_acc for s in scores]
    have_pacc = all(v is not None for v in paccs)
    return EvalReport(
        per_paragraph=tuple(scores),
        paragraph_ids=tuple(paragraph_ids),
        acc_mean=float(accs.mean()),
        tau_mean=float(taus.mean()),
        pmr=pmr(scores),
        pairwise_acc_mean=float(np.mean(paccs)) if have_pacc else None,
        pairwise_acc_std=float(np.std(paccs)) if have_pacc else None,
        family=family,
        strategy=strategy,
        corpus=corpus,
    )
