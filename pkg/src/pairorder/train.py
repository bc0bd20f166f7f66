"""Cross-entropy training of the pair classifiers with Adam, multiplicative
learning-rate decay, gradient clipping, checkpointing, and held-out
evaluation.

Local families train on shuffled mini-batches of pair examples; global
families train per paragraph so the paragraph context is available in the
forward pass.  All randomness fans out from the config seed through tagged
sub-seeds, and the per-epoch batch order is derived statelessly from
(seed, epoch), so a resumed run replays the exact batch sequence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pairorder.core import Paragraph, ShuffleRecord, derive_seed, gold_ordering
from pairorder.data import Vocab, make_pair_dataset, shuffled_sentences, tokenize_pair
from pairorder.decode import DecodeConfig, beam_decode, topo_decode
from pairorder.encoders import (
    ModelSpec,
    build_model,
    build_paragraph_batch,
    needs_paragraph_context,
    needs_singles,
    pack_pairs,
    pair_probs,
    save_model,
)
from pairorder.metrics import EvalReport, aggregate, score_paragraph
from pairorder.nn import autograd as ag
from pairorder.nn.autograd import no_grad
from pairorder.nn.checkpoint import load_checkpoint, save_checkpoint, validate_shapes


class TrainDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-4
    decay_per_epoch: float = 1.0  # multiplicative: lr(epoch) = lr * decay**epoch
    epochs: int = 20
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    seed: int = 0
    eval_every: int = 0  # extra held-out evals every k steps; epoch ends always evaluate
    holdout: float = 0.1
    dtype: str = "float64"
    detach_context: bool = False
    target_pair_acc: float | None = None  # stop early once held-out accuracy reaches this

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 < self.decay_per_epoch <= 1:
            raise ValueError("decay_per_epoch must lie in (0, 1]")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not 0 <= self.holdout < 1:
            raise ValueError("holdout must lie in [0, 1)")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32


class Adam:
    def __init__(self, params: dict[str, "ag.Tensor"], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.t = 0

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, t in self.params.items():
            g = t.grad
            if g is None:
                continue
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * (g * g)
            t.data = t.data - lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_gradients(params: dict[str, "ag.Tensor"], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``;
    returns the pre-clip norm."""
    total = 0.0
    for t in params.values():
        if t.grad is not None:
            total += float((t.grad * t.grad).sum())
    norm = math.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for t in params.values():
            if t.grad is not None:
                t.grad = t.grad * scale
    return norm


# ---------------------------------------------------------------------------
# training data materialization

@dataclass
class LocalDataset:
    """Pre-tokenized pair examples, padded once to a common length."""

    ids: np.ndarray
    segments: np.ndarray
    mask: np.ndarray
    first_mask: np.ndarray
    second_mask: np.ndarray
    classes: np.ndarray  # 0 = first sentence precedes

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    def batch(self, rows: np.ndarray):
        from pairorder.encoders import PairBatch

        return (
            PairBatch(self.ids[rows], self.segments[rows], self.mask[rows],
                      self.first_mask[rows], self.second_mask[rows]),
            self.classes[rows],
        )


def build_local_dataset(vocab: Vocab, paragraphs: list[Paragraph], records: list[ShuffleRecord],
                        max_len: int) -> LocalDataset:
    by_id = {p.id: p for p in paragraphs}
    rec_by_id = {r.paragraph_id: r for r in records}
    shuffled = {pid: shuffled_sentences(by_id[pid], rec_by_id[pid]) for pid in by_id}
    examples = make_pair_dataset(paragraphs, records)
    encs = []
    classes = np.empty(len(examples), dtype=np.int64)
    for k, ex in enumerate(examples):
        sents = shuffled[ex.pid]
        encs.append(tokenize_pair(vocab, sents[ex.i], sents[ex.j], max_len))
        classes[k] = 0 if ex.label == 1 else 1
    batch = pack_pairs(encs)
    return LocalDataset(batch.ids, batch.segments, batch.mask, batch.first_mask, batch.second_mask, classes)


@dataclass
class ParagraphDataset:
    batches: list  # ParagraphBatch per paragraph
    classes: list[np.ndarray]

    @property
    def size(self) -> int:
        return len(self.batches)


def build_paragraph_dataset(vocab: Vocab, paragraphs: list[Paragraph], records: list[ShuffleRecord],
                            max_len: int, include_singles: bool) -> ParagraphDataset:
    by_id = {r.paragraph_id: r for r in records}
    batches, classes = [], []
    for p in paragraphs:
        rec = by_id[p.id]
        sents = shuffled_sentences(p, rec)
        pb = build_paragraph_batch(vocab, sents, max_len, include_singles=include_singles)
        gold_rank = rec.perm
        cls = np.array([0 if gold_rank[i] < gold_rank[j] else 1 for i, j in pb.pair_index], dtype=np.int64)
        batches.append(pb)
        classes.append(cls)
    return ParagraphDataset(batches, classes)


def split_paragraphs(paragraphs: list[Paragraph], records: list[ShuffleRecord], holdout: float,
                     seed: int) -> tuple[list, list, list, list]:
    """Deterministic paragraph-level split; held-out paragraphs are unseen."""
    by_id = {r.paragraph_id: r for r in records}
    order = np.random.default_rng(derive_seed(seed, "split")).permutation(len(paragraphs))
    k = int(round(len(paragraphs) * holdout))
    eval_idx = set(order[:k].tolist())
    train_p = [p for i, p in enumerate(paragraphs) if i not in eval_idx]
    eval_p = [p for i, p in enumerate(paragraphs) if i in eval_idx]
    return train_p, [by_id[p.id] for p in train_p], eval_p, [by_id[p.id] for p in eval_p]


# ---------------------------------------------------------------------------
# held-out evaluation

def _local_pair_accuracy(model, data: LocalDataset, batch_size: int = 256) -> float:
    hits = 0
    with no_grad():
        for start in range(0, data.size, batch_size):
            rows = np.arange(start, min(start + batch_size, data.size))
            batch, classes = data.batch(rows)
            probs = pair_probs(model.pair_logits(batch))
            hits += int(((probs[:, 1] > probs[:, 0]).astype(np.int64) == classes).sum())
    return hits / data.size


def _paragraph_pair_accuracy(model, data: ParagraphDataset) -> float:
    hits = 0
    total = 0
    with no_grad():
        for pb, classes in zip(data.batches, data.classes):
            probs = pair_probs(model.paragraph_logits(pb))
            hits += int(((probs[:, 1] > probs[:, 0]).astype(np.int64) == classes).sum())
            total += len(classes)
    return hits / total


def held_out_pair_accuracy(model, data) -> float:
    if isinstance(data, LocalDataset):
        return _local_pair_accuracy(model, data)
    return _paragraph_pair_accuracy(model, data)


# ---------------------------------------------------------------------------
# the training loop

@dataclass
class TrainResult:
    model: object
    vocab: Vocab
    history: list[dict]
    best_pair_acc: float
    train_paragraphs: list[Paragraph]
    eval_paragraphs: list[Paragraph]
    train_records: list[ShuffleRecord]
    eval_records: list[ShuffleRecord]


def train_pairwise(
    spec_family: str,
    paragraphs: list[Paragraph],
    records: list[ShuffleRecord],
    cfg: TrainConfig,
    model_kwargs: dict | None = None,
    vocab_cap: int | None = None,
    log_path: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> TrainResult:
    if not paragraphs:
        raise ValueError("empty corpus")
    train_p, train_r, eval_p, eval_r = split_paragraphs(paragraphs, records, cfg.holdout, cfg.seed)
    if not train_p:
        raise ValueError("holdout leaves no training paragraphs")

    vocab = Vocab.build((s for p in train_p for s in p.sentences), cap=vocab_cap)
    spec = ModelSpec(
        family=spec_family,
        vocab_size=vocab.size,
        seed=derive_seed(cfg.seed, "model"),
        **(model_kwargs or {}),
    )
    model = build_model(spec, dtype=cfg.np_dtype, detach_context=cfg.detach_context)
    params = dict(model.named_params())
    opt = Adam(params, cfg.beta1, cfg.beta2, cfg.adam_eps)

    start_epoch = 0
    step = 0
    best_acc = -1.0
    if resume_from is not None:
        start_epoch, step, best_acc = load_train_state(resume_from, model, opt)

    per_paragraph = needs_paragraph_context(model)
    max_len = spec.max_seq_len
    if per_paragraph:
        train_data = build_paragraph_dataset(vocab, train_p, train_r, max_len, needs_singles(model))
        eval_data = build_paragraph_dataset(vocab, eval_p, eval_r, max_len, needs_singles(model)) if eval_p else None
    else:
        train_data = build_local_dataset(vocab, train_p, train_r, max_len)
        eval_data = build_local_dataset(vocab, eval_p, eval_r, max_len) if eval_p else None

    history: list[dict] = []
    log_fh = open(log_path, "a", encoding="utf-8") if log_path else None

    def log(record: dict) -> None:
        history.append(record)
        if log_fh:
            log_fh.write(json.dumps(record) + "\n")
            log_fh.flush()

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    def evaluate_and_checkpoint(epoch: int, lr: float, loss_val: float) -> float | None:
        nonlocal best_acc
        if eval_data is None:
            return None
        acc = held_out_pair_accuracy(model, eval_data)
        if acc > best_acc:
            best_acc = acc
            if ckpt_dir:
                save_model(ckpt_dir / "best.ckpt", model, vocab)
        log({"step": step, "epoch": epoch, "lr": lr, "loss": loss_val, "pair_acc": acc})
        return acc

    try:
        stop = False
        for epoch in range(start_epoch, cfg.epochs):
            lr = cfg.lr * cfg.decay_per_epoch**epoch
            order = np.random.default_rng(derive_seed(cfg.seed, f"order:{epoch}")).permutation(train_data.size)
            if per_paragraph:
                batch_starts = range(len(order))
            else:
                batch_starts = range(0, len(order), cfg.batch_size)
            loss_val = math.nan
            for start in batch_starts:
                if per_paragraph:
                    pb = train_data.batches[order[start]]
                    classes = train_data.classes[order[start]]
                    logits = model.paragraph_logits(pb)
                else:
                    rows = order[start:start + cfg.batch_size]
                    batch, classes = train_data.batch(rows)
                    logits = model.pair_logits(batch)
                loss = ag.cross_entropy(logits, classes)
                loss_val = loss.item()
                if not math.isfinite(loss_val):
                    if ckpt_dir:
                        save_train_state(ckpt_dir / "diverged.ckpt", model, opt, epoch, step, best_acc)
                    raise TrainDiverged(f"loss {loss_val} at step {step}; state dumped")
                opt.zero_grad()
                loss.backward()
                clip_gradients(params, cfg.clip_norm)
                opt.step(lr)
                step += 1
                if cfg.eval_every and step % cfg.eval_every == 0:
                    acc = evaluate_and_checkpoint(epoch, lr, loss_val)
                    if acc is not None and cfg.target_pair_acc and acc >= cfg.target_pair_acc:
                        stop = True
                        break
                else:
                    log({"step": step, "epoch": epoch, "lr": lr, "loss": loss_val, "pair_acc": None})
            if not stop:
                acc = evaluate_and_checkpoint(epoch, lr, loss_val)
                if acc is not None and cfg.target_pair_acc and acc >= cfg.target_pair_acc:
                    stop = True
            if ckpt_dir:
                save_train_state(ckpt_dir / "state.ckpt", model, opt, epoch + 1, step, best_acc)
            if stop:
                break
        if ckpt_dir:
            save_model(ckpt_dir / "final.ckpt", model, vocab)
    finally:
        if log_fh:
            log_fh.close()

    return TrainResult(model, vocab, history, best_acc, train_p, eval_p, train_r, eval_r)


# ---------------------------------------------------------------------------
# exact-resume state (float64 payloads, unlike the float32 model checkpoints)

def save_train_state(path, model, opt: Adam, epoch: int, step: int, best_acc: float) -> None:
    tensors: dict[str, np.ndarray] = {}
    for name, t in model.named_params():
        tensors[f"param.{name}"] = t.data
        tensors[f"adam.m.{name}"] = opt.m[name]
        tensors[f"adam.v.{name}"] = opt.v[name]
    config = {
        "kind": "train-state",
        "epoch": epoch,
        "step": step,
        "adam_t": opt.t,
        "best_pair_acc": best_acc,
    }
    save_checkpoint(path, config, tensors, dtype="<f8")


def load_train_state(path, model, opt: Adam) -> tuple[int, int, float]:
    config, tensors = load_checkpoint(path)
    if config.get("kind") != "train-state":
        raise ValueError(f"{path}: not a training-state checkpoint")
    params = dict(model.named_params())
    expected: dict[str, np.ndarray] = {}
    for name, t in params.items():
        expected[f"param.{name}"] = t.data
        expected[f"adam.m.{name}"] = t.data
        expected[f"adam.v.{name}"] = t.data
    validate_shapes(expected, tensors, str(path))
    for name, t in params.items():
        t.data = tensors[f"param.{name}"].astype(t.data.dtype)
        opt.m[name] = tensors[f"adam.m.{name}"].astype(t.data.dtype)
        opt.v[name] = tensors[f"adam.v.{name}"].astype(t.data.dtype)
    opt.t = int(config["adam_t"])
    return int(config["epoch"]), int(config["step"]), float(config["best_pair_acc"])


# ---------------------------------------------------------------------------
# end-to-end evaluation

def score_corpus(model, vocab: Vocab, paragraphs: list[Paragraph], records: list[ShuffleRecord]):
    """Score matrices over the shuffled sentence lists, in corpus order."""
    from pairorder.encoders import score_matrix

    by_id = {r.paragraph_id: r for r in records}
    out = []
    for p in paragraphs:
        rec = by_id[p.id]
        out.append(score_matrix(model, vocab, shuffled_sentences(p, rec), p.id))
    return out


def evaluate_matrices(
    matrices,
    records: list[ShuffleRecord],
    strategies: dict[str, DecodeConfig | str],
    family: str | None = None,
    corpus: str | None = None,
) -> dict[str, EvalReport]:
    """Decode every matrix under each strategy and aggregate the metrics.

    ``strategies`` maps a report label to a DecodeConfig or the string
    ``"topo"`` for the tournament baseline.
    """
    by_id = {r.paragraph_id: r for r in records}
    reports = {}
    for label, how in strategies.items():
        scores, ids = [], []
        for m in matrices:
            gold = gold_ordering(by_id[m.paragraph_id])
            pred = topo_decode(m) if how == "topo" else beam_decode(m, how)
            scores.append(score_paragraph(pred, gold, m if m.n >= 2 else None))
            ids.append(m.paragraph_id)
        reports[label] = aggregate(scores, ids, family=family, strategy=label, corpus=corpus)
    return reports


def evaluate_end_to_end(
    model,
    vocab: Vocab,
    paragraphs: list[Paragraph],
    records: list[ShuffleRecord],
    beam_width: int = 64,
    score_space: str = "probability",
    include_topo: bool = False,
    corpus: str | None = None,
) -> dict[str, EvalReport]:
    """Score, decode with both beam strategies (reported under the "-1"/"-2"
    labels), and aggregate Acc / tau / PMR plus pairwise accuracy."""
    matrices = score_corpus(model, vocab, paragraphs, records)
    strategies: dict[str, DecodeConfig | str] = {
        "1": DecodeConfig(strategy="adjacent", beam_width=beam_width, score_space=score_space),
        "2": DecodeConfig(strategy="all-pairs", beam_width=beam_width, score_space=score_space),
    }
    if include_topo:
        strategies["topo"] = "topo"
    family = getattr(model, "family", None)
    return evaluate_matrices(matrices, records, strategies, family=family, corpus=corpus)
