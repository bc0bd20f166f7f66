"""The model families producing pairwise order probabilities.

Six families, all built from the same miniature transformer encoder:

* ``local``          one encoder scoring each pair from its own tokens
* ``local-shared``   the parameter-reduced variant (cross-layer sharing plus
                     factorized embeddings)
* ``ensemble``       two differently-configured encoders whose head logits add
* ``global``         local scoring plus paragraph context: every pair's
                     sentence-level pooled vectors are pooled again per
                     sentence, mixed by a position-free transformer, and fed
                     through two extra logit heads
* ``global-ensemble`` the ensemble encoder under the same global context
* ``single-global``  ablation: context vectors come from encoding each
                     sentence alone instead of from the pair passes

The global transformer deliberately has no positional signal, so its outputs
are equivariant to the order sentences are presented in; score matrices are
invariant (up to float rounding) to the shuffle.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from pairorder.core import PairScoreMatrix, derive_seed
from pairorder.data import (
    PAD_ID,
    PairEncoding,
    SingleEncoding,
    Vocab,
    tokenize_pair,
    tokenize_single,
)
from pairorder.nn import autograd as ag
from pairorder.nn.autograd import Tensor, no_grad
from pairorder.nn.layers import AttnPool, Embedding, LayerNorm, Linear, TransformerBlock

FAMILIES = ("local", "local-shared", "ensemble", "global", "global-ensemble", "single-global")


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_width: int = 128
    max_seq_len: int = 32
    share_layers: bool = False
    embed_factor: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.embed_factor is not None and not 0 < self.embed_factor < self.d_model:
            raise ValueError(f"embed_factor={self.embed_factor} must be < d_model={self.d_model}")
        if self.vocab_size < 5:
            raise ValueError("vocab_size must cover the reserved ids")


class Encoder:
    """Token + learned positional + segment embeddings, layer norm, then a
    stack of post-norm transformer blocks (one parameter set reused across
    the stack when ``share_layers``)."""

    def __init__(self, cfg: EncoderConfig, dtype=np.float64):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        e = cfg.embed_factor or cfg.d_model
        self.tok_emb = Embedding(rng, cfg.vocab_size, e, dtype=dtype)
        self.proj = Linear(rng, e, cfg.d_model, bias=False, dtype=dtype) if cfg.embed_factor else None
        self.pos_emb = Embedding(rng, cfg.max_seq_len, cfg.d_model, dtype=dtype)
        self.seg_emb = Embedding(rng, 2, cfg.d_model, dtype=dtype)
        self.emb_ln = LayerNorm(cfg.d_model, dtype=dtype)
        n_unique = 1 if cfg.share_layers else cfg.n_layers
        self.blocks = [TransformerBlock(rng, cfg.d_model, cfg.n_heads, cfg.ffn_width, dtype=dtype) for _ in range(n_unique)]

    def __call__(self, ids: np.ndarray, segments: np.ndarray, mask: np.ndarray) -> Tensor:
        """ids/segments/mask: (batch, len) -> hidden states (batch, len, d)."""
        if ids.shape[1] > self.cfg.max_seq_len:
            raise ValueError(f"sequence length {ids.shape[1]} exceeds max_seq_len={self.cfg.max_seq_len}")
        if ids.max() >= self.cfg.vocab_size:
            raise ValueError("token id out of vocabulary")
        tok = self.tok_emb(ids)
        if self.proj is not None:
            tok = self.proj(tok)
        pos = self.pos_emb(np.arange(ids.shape[1]))
        h = self.emb_ln(ag.add(ag.add(tok, pos), self.seg_emb(segments)))
        for layer in range(self.cfg.n_layers):
            block = self.blocks[0] if self.cfg.share_layers else self.blocks[layer]
            h = block(h, mask)
        return h

    def named_params(self, prefix: str):
        yield from self.tok_emb.named_params(f"{prefix}.tok_emb")
        if self.proj is not None:
            yield from self.proj.named_params(f"{prefix}.proj")
        yield from self.pos_emb.named_params(f"{prefix}.pos_emb")
        yield from self.seg_emb.named_params(f"{prefix}.seg_emb")
        yield from self.emb_ln.named_params(f"{prefix}.emb_ln")
        for b, block in enumerate(self.blocks):
            yield from block.named_params(f"{prefix}.block{b}")


# ---------------------------------------------------------------------------
# batches

@dataclass
class PairBatch:
    """Padded batch of [CLS] s_i [SEP] s_j [SEP] encodings."""

    ids: np.ndarray        # (B, L) int64
    segments: np.ndarray   # (B, L) int64
    mask: np.ndarray       # (B, L) 1.0 on real tokens
    first_mask: np.ndarray   # (B, L) 1.0 on s_i's own tokens
    second_mask: np.ndarray  # (B, L) 1.0 on s_j's own tokens

    @property
    def size(self) -> int:
        return self.ids.shape[0]


def pack_pairs(encodings: list[PairEncoding]) -> PairBatch:
    b = len(encodings)
    length = max(len(e) for e in encodings)
    ids = np.full((b, length), PAD_ID, dtype=np.int64)
    segments = np.zeros((b, length), dtype=np.int64)
    mask = np.zeros((b, length), dtype=np.float64)
    first = np.zeros((b, length), dtype=np.float64)
    second = np.zeros((b, length), dtype=np.float64)
    for r, e in enumerate(encodings):
        k = len(e)
        ids[r, :k] = e.ids
        segments[r, :k] = e.segments
        mask[r, :k] = 1.0
        first[r, e.span_i[0]:e.span_i[1]] = 1.0
        second[r, e.span_j[0]:e.span_j[1]] = 1.0
    return PairBatch(ids, segments, mask, first, second)


def pack_singles(encodings: list[SingleEncoding]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b = len(encodings)
    length = max(len(e) for e in encodings)
    ids = np.full((b, length), PAD_ID, dtype=np.int64)
    segments = np.zeros((b, length), dtype=np.int64)
    mask = np.zeros((b, length), dtype=np.float64)
    for r, e in enumerate(encodings):
        k = len(e)
        ids[r, :k] = e.ids
        segments[r, :k] = e.segments
        mask[r, :k] = 1.0
    return ids, segments, mask


def ordered_pairs(n: int) -> list[tuple[int, int]]:
    """All N(N-1) ordered pairs in the fixed traversal order."""
    return [(i, j) for i in range(n) for j in range(n) if j != i]


@dataclass
class ParagraphBatch:
    """Everything the models need to score one paragraph's pairs at once."""

    n: int
    pair_index: list[tuple[int, int]]
    pairs: PairBatch
    i_arr: np.ndarray       # (P,) sentence index of each row's first slot
    j_arr: np.ndarray       # (P,) second slot
    gather_idx: np.ndarray  # (n, 2(n-1)) rows of the stacked pooled vectors per sentence
    singles: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None


def build_paragraph_batch(vocab: Vocab, sentences: list[str], max_len: int,
                          include_singles: bool = False) -> ParagraphBatch:
    n = len(sentences)
    if n < 2:
        raise ValueError("paragraph context needs at least two sentences")
    index = ordered_pairs(n)
    encodings = [tokenize_pair(vocab, sentences[i], sentences[j], max_len) for i, j in index]
    p = len(index)
    i_arr = np.array([i for i, _ in index], dtype=np.int64)
    j_arr = np.array([j for _, j in index], dtype=np.int64)
    gather = np.empty((n, 2 * (n - 1)), dtype=np.int64)
    for s in range(n):
        firsts = [r for r, (i, _) in enumerate(index) if i == s]
        seconds = [p + r for r, (_, j) in enumerate(index) if j == s]
        gather[s] = firsts + seconds
    singles = None
    if include_singles:
        singles = pack_singles([tokenize_single(vocab, s, max_len) for s in sentences])
    return ParagraphBatch(n, index, pack_pairs(encodings), i_arr, j_arr, gather, singles)


# ---------------------------------------------------------------------------
# families

class LocalPairModel:
    """softmax(W1(cls)) over the pair encoding alone."""

    def __init__(self, cfg: EncoderConfig, seed: int, dtype=np.float64):
        self.cfg = cfg
        self.seed = seed
        self.encoder = Encoder(cfg, dtype=dtype)
        self.head = Linear(np.random.default_rng(derive_seed(seed, "head")), cfg.d_model, 2, dtype=dtype)

    @property
    def family(self) -> str:
        return "local-shared" if self.cfg.share_layers else "local"

    @property
    def max_seq_len(self) -> int:
        return self.cfg.max_seq_len

    def cls_states(self, pairs: PairBatch) -> Tensor:
        return self.encoder(pairs.ids, pairs.segments, pairs.mask)[:, 0]

    def pair_logits(self, pairs: PairBatch) -> Tensor:
        return self.head(self.cls_states(pairs))

    def paragraph_logits(self, pb: ParagraphBatch) -> Tensor:
        return self.pair_logits(pb.pairs)

    def named_params(self):
        yield from self.encoder.named_params("encoder")
        yield from self.head.named_params("head")


class EnsemblePairModel:
    """Two distinct encoders; the pair's logits are the sum of the two
    per-encoder heads."""

    def __init__(self, cfg_a: EncoderConfig, cfg_b: EncoderConfig, seed: int, dtype=np.float64):
        self.cfg_a, self.cfg_b = cfg_a, cfg_b
        self.seed = seed
        self.enc_a = Encoder(cfg_a, dtype=dtype)
        self.enc_b = Encoder(cfg_b, dtype=dtype)
        self.head_a = Linear(np.random.default_rng(derive_seed(seed, "head-a")), cfg_a.d_model, 2, dtype=dtype)
        self.head_b = Linear(np.random.default_rng(derive_seed(seed, "head-b")), cfg_b.d_model, 2, dtype=dtype)

    family = "ensemble"

    @property
    def max_seq_len(self) -> int:
        return min(self.cfg_a.max_seq_len, self.cfg_b.max_seq_len)

    def pair_logits(self, pairs: PairBatch) -> Tensor:
        cls_a = self.enc_a(pairs.ids, pairs.segments, pairs.mask)[:, 0]
        cls_b = self.enc_b(pairs.ids, pairs.segments, pairs.mask)[:, 0]
        return ag.add(self.head_a(cls_a), self.head_b(cls_b))

    def paragraph_logits(self, pb: ParagraphBatch) -> Tensor:
        return self.pair_logits(pb.pairs)

    def named_params(self):
        yield from self.enc_a.named_params("enc_a")
        yield from self.enc_b.named_params("enc_b")
        yield from self.head_a.named_params("head_a")
        yield from self.head_b.named_params("head_b")


class GlobalPairModel:
    """Pair logits augmented with paragraph context:
    W1(cls) + W2(z_i) + W3(z_j), where the z's come from attention-pooled
    per-pair sentence vectors mixed by a position-free transformer."""

    def __init__(self, base, n_global_layers: int, seed: int, dtype=np.float64,
                 detach_context: bool = False):
        if isinstance(base, GlobalPairModel):
            raise TypeError("cannot nest global models")
        self.base = base
        self.seed = seed
        self.detach_context = detach_context
        d = self._d_model()
        self.token_pool = AttnPool(np.random.default_rng(derive_seed(seed, "token-pool")), d, dtype=dtype)
        self.pair_pool = AttnPool(np.random.default_rng(derive_seed(seed, "pair-pool")), d, dtype=dtype)
        grng = np.random.default_rng(derive_seed(seed, "global"))
        heads = getattr(base, "cfg", getattr(base, "cfg_a", None)).n_heads
        ffn = getattr(base, "cfg", getattr(base, "cfg_a", None)).ffn_width
        self.global_blocks = [TransformerBlock(grng, d, heads, ffn, dtype=dtype) for _ in range(n_global_layers)]
        self.head_zi = Linear(np.random.default_rng(derive_seed(seed, "head-zi")), d, 2, dtype=dtype)
        self.head_zj = Linear(np.random.default_rng(derive_seed(seed, "head-zj")), d, 2, dtype=dtype)

    def _d_model(self) -> int:
        if isinstance(self.base, EnsemblePairModel):
            if self.base.cfg_a.d_model != self.base.cfg_b.d_model:
                raise ValueError("global context over an ensemble needs equal encoder widths")
            return self.base.cfg_a.d_model
        return self.base.cfg.d_model

    @property
    def family(self) -> str:
        return "global-ensemble" if isinstance(self.base, EnsemblePairModel) else "global"

    @property
    def max_seq_len(self) -> int:
        return self.base.max_seq_len

    def _encoder_passes(self, pb: ParagraphBatch):
        """Hidden states and cls logits from the base encoder(s)."""
        pairs = pb.pairs
        if isinstance(self.base, EnsemblePairModel):
            h_a = self.base.enc_a(pairs.ids, pairs.segments, pairs.mask)
            h_b = self.base.enc_b(pairs.ids, pairs.segments, pairs.mask)
            cls_logits = ag.add(self.base.head_a(h_a[:, 0]), self.base.head_b(h_b[:, 0]))
            return [h_a, h_b], cls_logits
        h = self.base.encoder(pairs.ids, pairs.segments, pairs.mask)
        return [h], self.base.head(h[:, 0])

    def context(self, pb: ParagraphBatch) -> Tensor:
        """Globally contextualized sentence embeddings z_1..z_N."""
        hiddens, _ = self._encoder_passes(pb)
        return self._z_from_hiddens(pb, hiddens)

    def _z_from_hiddens(self, pb: ParagraphBatch, hiddens) -> Tensor:
        pairs = pb.pairs
        pooled = []
        for h in hiddens:
            pooled.append(self.token_pool(h, pairs.first_mask))
            pooled.append(self.token_pool(h, pairs.second_mask))
        # stack first-slot then second-slot vectors (per encoder) and gather
        # each sentence's 2(N-1) (or 4(N-1) for the ensemble) vectors
        stacked = ag.concat(pooled, axis=0)
        p = pb.pairs.size
        idx = pb.gather_idx
        if len(hiddens) == 2:
            # per-encoder offsets: [first_a, second_a, first_b, second_b]
            idx = np.concatenate([idx, idx + 2 * p], axis=1)
        per_sentence = ag.gather_rows(stacked, idx)  # (n, slots, d)
        x = self.pair_pool(per_sentence)             # (n, d)
        z = ag.reshape(x, (1,) + x.shape)
        for block in self.global_blocks:
            z = block(z)  # no positional signal, no mask: full equivariance
        return ag.reshape(z, x.shape)

    def paragraph_logits(self, pb: ParagraphBatch) -> Tensor:
        hiddens, cls_logits = self._encoder_passes(pb)
        z = self._z_from_hiddens(pb, hiddens)
        if self.detach_context:
            z = z.detach()
        zi = ag.gather_rows(z, pb.i_arr)
        zj = ag.gather_rows(z, pb.j_arr)
        return ag.add(ag.add(cls_logits, self.head_zi(zi)), self.head_zj(zj))

    def named_params(self):
        yield from self.base.named_params()
        yield from self.token_pool.named_params("token_pool")
        yield from self.pair_pool.named_params("pair_pool")
        for b, block in enumerate(self.global_blocks):
            yield from block.named_params(f"global.block{b}")
        yield from self.head_zi.named_params("head_zi")
        yield from self.head_zj.named_params("head_zj")


class SingleGlobalModel:
    """Ablation: context vectors are the CLS states of each sentence encoded
    alone; the pair CLS head and the z heads work as in the global model."""

    def __init__(self, base: LocalPairModel, n_global_layers: int, seed: int, dtype=np.float64,
                 detach_context: bool = False):
        self.base = base
        self.seed = seed
        self.detach_context = detach_context
        d = base.cfg.d_model
        grng = np.random.default_rng(derive_seed(seed, "global"))
        self.global_blocks = [
            TransformerBlock(grng, d, base.cfg.n_heads, base.cfg.ffn_width, dtype=dtype)
            for _ in range(n_global_layers)
        ]
        self.head_zi = Linear(np.random.default_rng(derive_seed(seed, "head-zi")), d, 2, dtype=dtype)
        self.head_zj = Linear(np.random.default_rng(derive_seed(seed, "head-zj")), d, 2, dtype=dtype)

    family = "single-global"

    @property
    def max_seq_len(self) -> int:
        return self.base.max_seq_len

    def context(self, pb: ParagraphBatch) -> Tensor:
        if pb.singles is None:
            raise ValueError("paragraph batch was built without single-sentence encodings")
        ids, segments, mask = pb.singles
        x = self.base.encoder(ids, segments, mask)[:, 0]  # (n, d)
        z = ag.reshape(x, (1,) + x.shape)
        for block in self.global_blocks:
            z = block(z)
        return ag.reshape(z, x.shape)

    def paragraph_logits(self, pb: ParagraphBatch) -> Tensor:
        cls_logits = self.base.pair_logits(pb.pairs)
        z = self.context(pb)
        if self.detach_context:
            z = z.detach()
        zi = ag.gather_rows(z, pb.i_arr)
        zj = ag.gather_rows(z, pb.j_arr)
        return ag.add(ag.add(cls_logits, self.head_zi(zi)), self.head_zj(zj))

    def named_params(self):
        yield from self.base.named_params()
        for b, block in enumerate(self.global_blocks):
            yield from block.named_params(f"global.block{b}")
        yield from self.head_zi.named_params("head_zi")
        yield from self.head_zj.named_params("head_zj")


def param_count(model) -> int:
    return sum(t.data.size for _, t in model.named_params())


# ---------------------------------------------------------------------------
# construction and scoring

@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to rebuild a model deterministically."""

    family: str
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_width: int = 128
    max_seq_len: int = 32
    embed_factor: int | None = None
    n_global_layers: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")


def build_model(spec: ModelSpec, dtype=np.float64, detach_context: bool = False):
    factor = spec.embed_factor if spec.embed_factor is not None else max(spec.d_model // 4, 1)
    base_kwargs = dict(
        vocab_size=spec.vocab_size,
        d_model=spec.d_model,
        n_layers=spec.n_layers,
        n_heads=spec.n_heads,
        ffn_width=spec.ffn_width,
        max_seq_len=spec.max_seq_len,
    )

    def plain(tag):
        return EncoderConfig(**base_kwargs, seed=derive_seed(spec.seed, tag))

    def shared(tag):
        return EncoderConfig(**base_kwargs, share_layers=True, embed_factor=factor,
                             seed=derive_seed(spec.seed, tag))

    if spec.family == "local":
        model = LocalPairModel(plain("enc"), spec.seed, dtype=dtype)
    elif spec.family == "local-shared":
        model = LocalPairModel(shared("enc"), spec.seed, dtype=dtype)
    elif spec.family == "ensemble":
        model = EnsemblePairModel(plain("enc-a"), shared("enc-b"), spec.seed, dtype=dtype)
    elif spec.family == "global":
        base = LocalPairModel(plain("enc"), spec.seed, dtype=dtype)
        model = GlobalPairModel(base, spec.n_global_layers, spec.seed, dtype=dtype,
                                detach_context=detach_context)
    elif spec.family == "global-ensemble":
        base = EnsemblePairModel(plain("enc-a"), shared("enc-b"), spec.seed, dtype=dtype)
        model = GlobalPairModel(base, spec.n_global_layers, spec.seed, dtype=dtype,
                                detach_context=detach_context)
    else:
        base = LocalPairModel(plain("enc"), spec.seed, dtype=dtype)
        model = SingleGlobalModel(base, spec.n_global_layers, spec.seed, dtype=dtype,
                                  detach_context=detach_context)
    model.spec = spec
    return model


def save_model(path, model, vocab: Vocab) -> None:
    """Model checkpoint: spec + vocabulary in the JSON header, parameters as
    little-endian float32 payloads."""
    from pairorder.nn import checkpoint

    spec = getattr(model, "spec", None)
    if spec is None:
        raise ValueError("model lacks a ModelSpec; build it via build_model")
    tokens = [tok for tok, _ in sorted(vocab.token_to_id.items(), key=lambda kv: kv[1])]
    config = {"kind": "model", "spec": asdict(spec), "vocab_tokens": tokens}
    checkpoint.save_checkpoint(path, config, {k: t.data for k, t in model.named_params()}, dtype="<f4")


def load_model(path, dtype=np.float64, detach_context: bool = False):
    """Rebuild the model from its checkpoint; shapes are validated against a
    fresh build from the stored spec."""
    from pairorder.data import N_RESERVED
    from pairorder.nn import checkpoint

    config, tensors = checkpoint.load_checkpoint(path)
    if config.get("kind") != "model":
        raise ValueError(f"{path}: not a model checkpoint")
    spec_dict = dict(config["spec"])
    if spec_dict.get("embed_factor") is None:
        spec_dict["embed_factor"] = None
    spec = ModelSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in spec_dict.items()})
    vocab = Vocab({tok: N_RESERVED + i for i, tok in enumerate(config["vocab_tokens"])})
    model = build_model(spec, dtype=dtype, detach_context=detach_context)
    params = dict(model.named_params())
    checkpoint.validate_shapes({k: t.data for k, t in params.items()}, tensors, str(path))
    for name, t in params.items():
        t.data = tensors[name].astype(t.data.dtype)
    return model, vocab


def needs_paragraph_context(model) -> bool:
    return isinstance(model, (GlobalPairModel, SingleGlobalModel))


def needs_singles(model) -> bool:
    return isinstance(model, SingleGlobalModel)


def pair_probs(logits: Tensor) -> np.ndarray:
    """softmax over the two logits; column 0 is P(first precedes second)."""
    return ag.softmax(logits, axis=-1).data


def score_matrix(model, vocab: Vocab, sentences: list[str], paragraph_id: str = "") -> PairScoreMatrix:
    """Fill all off-diagonal entries with the family's pair probabilities;
    both directions are scored independently."""
    n = len(sentences)
    if n == 1:
        return PairScoreMatrix(paragraph_id, np.zeros((1, 1)))
    with no_grad():
        pb = build_paragraph_batch(vocab, sentences, model.max_seq_len, include_singles=needs_singles(model))
        probs = pair_probs(model.paragraph_logits(pb))
    p = np.zeros((n, n), dtype=np.float64)
    for r, (i, j) in enumerate(pb.pair_index):
        p[i, j] = probs[r, 0]
    return PairScoreMatrix(paragraph_id, p)
