"""Pairwise sentence ordering: models, decoders, and evaluation metrics."""

from pairorder.core import (
    Ordering,
    PairScoreMatrix,
    Paragraph,
    ShuffleRecord,
    apply_ordering,
    derive_seed,
    gold_ordering,
    shuffle,
)

__version__ = "0.1.0"

__all__ = [
    "Paragraph",
    "ShuffleRecord",
    "Ordering",
    "PairScoreMatrix",
    "shuffle",
    "gold_ordering",
    "apply_ordering",
    "derive_seed",
    "__version__",
]
