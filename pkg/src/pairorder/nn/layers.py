"""Layers for the miniature pair encoders: linear maps, embeddings, layer
norm, multi-head self-attention, position-wise feed-forward, post-norm
transformer blocks, and the tanh attention-pooling head.

Parameter init is Xavier-uniform for weight matrices, zeros for biases,
gain 1 / bias 0 for layer norms, all drawn from a caller-provided
``numpy.random.Generator`` so models are seedable.
"""

from __future__ import annotations

import math

import numpy as np

from pairorder.nn import autograd as ag
from pairorder.nn.autograd import Tensor

NEG_INF = -1e30  # additive mask value; exact zero attention after softmax


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None, dtype=np.float64) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Linear:
    def __init__(self, rng, d_in: int, d_out: int, bias: bool = True, dtype=np.float64):
        self.w = Tensor(xavier(rng, d_in, d_out, dtype=dtype), requires_grad=True)
        self.b = Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x) -> Tensor:
        y = ag.matmul(x, self.w)
        return ag.add(y, self.b) if self.b is not None else y

    def named_params(self, prefix: str):
        yield f"{prefix}.w", self.w
        if self.b is not None:
            yield f"{prefix}.b", self.b


class Embedding:
    def __init__(self, rng, vocab: int, dim: int, dtype=np.float64):
        self.table = Tensor(xavier(rng, vocab, dim, dtype=dtype), requires_grad=True)

    def __call__(self, ids) -> Tensor:
        return ag.embedding(self.table, ids)

    def named_params(self, prefix: str):
        yield f"{prefix}.table", self.table


class LayerNorm:
    def __init__(self, dim: int, eps: float = 1e-5, dtype=np.float64):
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
        self.eps = eps

    def __call__(self, x) -> Tensor:
        return ag.layer_norm(x, self.gain, self.bias, self.eps)

    def named_params(self, prefix: str):
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.bias", self.bias


def attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention: softmax(QK^T / sqrt(d_k)) V.

    ``mask``, when given, is an additive array broadcastable to the score
    shape; masked positions should hold :data:`NEG_INF`.
    """
    d_k = q.shape[-1]
    scores = ag.mul(ag.matmul(q, ag.transpose(k, _swap_last(k.ndim))), 1.0 / math.sqrt(d_k))
    if mask is not None:
        scores = ag.add(scores, mask)
    return ag.matmul(ag.softmax(scores, axis=-1), v)


def _swap_last(ndim: int) -> tuple[int, ...]:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


class MultiHeadAttention:
    def __init__(self, rng, d_model: int, n_heads: int, dtype=np.float64):
        if d_model % n_heads != 0:
            raise ValueError(f"d_model={d_model} not divisible by n_heads={n_heads}")
        self.h = n_heads
        self.d_k = d_model // n_heads
        self.wq = Linear(rng, d_model, d_model, dtype=dtype)
        self.wk = Linear(rng, d_model, d_model, dtype=dtype)
        self.wv = Linear(rng, d_model, d_model, dtype=dtype)
        self.wo = Linear(rng, d_model, d_model, dtype=dtype)

    def __call__(self, x: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        b, l, d = x.shape

        def heads(t):
            return ag.transpose(ag.reshape(t, (b, l, self.h, self.d_k)), (0, 2, 1, 3))

        q, k, v = heads(self.wq(x)), heads(self.wk(x)), heads(self.wv(x))
        mask = None
        if key_mask is not None:
            # key_mask (b, l) with 1 = valid; broadcast over heads and queries
            mask = np.where(key_mask[:, None, None, :] > 0, 0.0, NEG_INF).astype(x.data.dtype)
        ctx = attention(q, k, v, mask)
        merged = ag.reshape(ag.transpose(ctx, (0, 2, 1, 3)), (b, l, d))
        return self.wo(merged)

    def named_params(self, prefix: str):
        yield from self.wq.named_params(f"{prefix}.wq")
        yield from self.wk.named_params(f"{prefix}.wk")
        yield from self.wv.named_params(f"{prefix}.wv")
        yield from self.wo.named_params(f"{prefix}.wo")


class FeedForward:
    def __init__(self, rng, d_model: int, d_ff: int, dtype=np.float64):
        self.lin1 = Linear(rng, d_model, d_ff, dtype=dtype)
        self.lin2 = Linear(rng, d_ff, d_model, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(ag.gelu(self.lin1(x)))

    def named_params(self, prefix: str):
        yield from self.lin1.named_params(f"{prefix}.lin1")
        yield from self.lin2.named_params(f"{prefix}.lin2")


class TransformerBlock:
    """Post-norm residual wiring: LN(x + MHA(x)), then LN(. + FFN(.))."""

    def __init__(self, rng, d_model: int, n_heads: int, d_ff: int, dtype=np.float64):
        self.mha = MultiHeadAttention(rng, d_model, n_heads, dtype=dtype)
        self.ln1 = LayerNorm(d_model, dtype=dtype)
        self.ffn = FeedForward(rng, d_model, d_ff, dtype=dtype)
        self.ln2 = LayerNorm(d_model, dtype=dtype)

    def __call__(self, x: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        h = self.ln1(ag.add(x, self.mha(x, key_mask)))
        return self.ln2(ag.add(h, self.ffn(h)))

    def named_params(self, prefix: str):
        yield from self.mha.named_params(f"{prefix}.mha")
        yield from self.ln1.named_params(f"{prefix}.ln1")
        yield from self.ffn.named_params(f"{prefix}.ffn")
        yield from self.ln2.named_params(f"{prefix}.ln2")


class AttnPool:
    """tanh-scored attention pooling: u = tanh(W_w h), weights from v_w . u,
    output the weighted sum of the rows."""

    def __init__(self, rng, d_model: int, dtype=np.float64):
        self.w_w = Tensor(xavier(rng, d_model, d_model, dtype=dtype), requires_grad=True)
        self.v_w = Tensor(xavier(rng, d_model, 1, dtype=dtype), requires_grad=True)

    def __call__(self, h: Tensor, valid_mask: np.ndarray | None = None) -> Tensor:
        """h: (..., rows, d) -> (..., d); ``valid_mask`` (..., rows) marks
        rows eligible for weight."""
        u = ag.tanh(ag.matmul(h, self.w_w))
        scores = ag.reshape(ag.matmul(u, self.v_w), h.shape[:-1])
        if valid_mask is not None:
            if not np.all(valid_mask.sum(axis=-1) > 0):
                raise ValueError("attention pooling needs at least one valid row")
            scores = ag.add(scores, np.where(valid_mask > 0, 0.0, NEG_INF).astype(h.data.dtype))
        alpha = ag.softmax(scores, axis=-1)
        weighted = ag.matmul(ag.reshape(alpha, alpha.shape[:-1] + (1, alpha.shape[-1])), h)
        return ag.reshape(weighted, h.shape[:-2] + (h.shape[-1],))

    def named_params(self, prefix: str):
        yield f"{prefix}.w_w", self.w_w
        yield f"{prefix}.v_w", self.v_w
