"""Position-enhanced transformer encoder with segment-recurrence memory.

Self-attention carries learned relative-position vectors added to keys and
values, so reordering tokens changes the computation (plain dot-product
attention is permutation-equivariant). Long inputs are encoded segment by
segment; each layer attends over the cached trailing hidden states of the
previous segments, which are treated as constants during backpropagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 0  # 0 means 4 * d_model
    k_rel: int = 8
    mem_len: int = 32
    max_seq_len: int = 128
    rel_pos_enabled: bool = True

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.k_rel < 0 or self.mem_len < 0:
            raise ValueError("k_rel and mem_len must be non-negative")
        if self.max_seq_len < 1 or self.n_layers < 1:
            raise ValueError("max_seq_len and n_layers must be positive")
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def n_buckets(self) -> int:
        return 2 * self.k_rel + 1


@dataclass
class EncoderLayerParams:
    w_query: Tensor
    w_key: Tensor
    w_value: Tensor
    w_out: Tensor
    rel_key: Tensor  # [2*k_rel+1, d_head], shared across heads
    rel_value: Tensor
    ff_w1: Tensor
    ff_b1: Tensor
    ff_w2: Tensor
    ff_b2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor


@dataclass
class EncoderParams:
    embed_table: Tensor
    layers: list[EncoderLayerParams]

    def named_tensors(self):
        yield "encoder.embed_table", self.embed_table
        for i, layer in enumerate(self.layers):
            for name in (
                "w_query", "w_key", "w_value", "w_out",
                "rel_key", "rel_value",
                "ff_w1", "ff_b1", "ff_w2", "ff_b2",
                "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias",
            ):
                yield f"encoder.layer{i}.{name}", getattr(layer, name)


@dataclass
class MemoryState:
    """Per-layer cache of each layer's trailing input rows (gradient-free)."""

    layers: tuple[np.ndarray, ...] = field(default_factory=tuple)

    @classmethod
    def empty(cls, n_layers: int, d_model: int) -> "MemoryState":
        return cls(tuple(np.zeros((0, d_model)) for _ in range(n_layers)))

    def rows(self, layer: int) -> np.ndarray:
        return self.layers[layer] if self.layers else np.zeros((0, 0))


def init_encoder_params(config: EncoderConfig, rng: np.random.Generator) -> EncoderParams:
    """Seeded uniform init in [-1/sqrt(d_model), +1/sqrt(d_model)]."""
    bound = 1.0 / math.sqrt(config.d_model)

    def uniform(*shape):
        return Tensor(rng.uniform(-bound, bound, size=shape))

    d, dff = config.d_model, config.d_ff
    embed_table = uniform(config.vocab_size, d)
    layers = []
    for _ in range(config.n_layers):
        layers.append(
            EncoderLayerParams(
                w_query=uniform(d, d),
                w_key=uniform(d, d),
                w_value=uniform(d, d),
                w_out=uniform(d, d),
                rel_key=uniform(config.n_buckets, config.d_head),
                rel_value=uniform(config.n_buckets, config.d_head),
                ff_w1=uniform(d, dff),
                ff_b1=Tensor(np.zeros(dff)),
                ff_w2=uniform(dff, d),
                ff_b2=Tensor(np.zeros(d)),
                ln1_gain=Tensor(np.ones(d)),
                ln1_bias=Tensor(np.zeros(d)),
                ln2_gain=Tensor(np.ones(d)),
                ln2_bias=Tensor(np.zeros(d)),
            )
        )
    return EncoderParams(embed_table, layers)


def embed(params: EncoderParams, ids) -> Tensor:
    """Embedding rows scaled by sqrt(d_model); no absolute positions added."""
    vocab_size, d_model = params.embed_table.shape
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ValueError(f"token id out of range for vocab of {vocab_size}")
    if ids.size == 0:
        return Tensor(np.zeros((0, d_model)))
    return ad.gather_rows(params.embed_table, ids) * math.sqrt(d_model)


def rel_bucket(i: int, j: int, k_rel: int) -> int:
    """Clipped relative offset j-i shifted into [0, 2*k_rel]."""
    return int(np.clip(j - i, -k_rel, k_rel)) + k_rel


def _bucket_matrix(n_query: int, n_mem: int, k_rel: int) -> np.ndarray:
    # query i sits at absolute position n_mem + i; keys run over 0..n_mem+L-1
    query_pos = np.arange(n_query)[:, None] + n_mem
    key_pos = np.arange(n_mem + n_query)[None, :]
    return np.clip(key_pos - query_pos, -k_rel, k_rel) + k_rel


def rel_attention(
    x: Tensor,
    mem: Tensor | None,
    layer: EncoderLayerParams,
    config: EncoderConfig,
) -> Tensor:
    """Multi-head self-attention with relative-position key/value terms.

    ``mem`` rows, when given, are prepended as extra key/value positions at
    negative offsets; queries come from ``x`` alone. With rel_pos_enabled
    off this is plain scaled dot-product attention.
    """
    if not np.isfinite(x.data).all():
        raise ValueError("non-finite attention input")
    n_query = x.shape[0]
    kv_input = ad.concat([mem, x], axis=0) if mem is not None and mem.shape[0] else x
    n_mem = kv_input.shape[0] - n_query

    queries = x @ layer.w_query
    keys = kv_input @ layer.w_key
    values = kv_input @ layer.w_value

    d_head = config.d_head
    inv_scale = 1.0 / math.sqrt(d_head)
    buckets = _bucket_matrix(n_query, n_mem, config.k_rel)
    head_outputs = []
    for h in range(config.n_heads):
        cols = slice(h * d_head, (h + 1) * d_head)
        q = queries[:, cols]
        k = keys[:, cols]
        v = values[:, cols]
        scores = q @ ad.transpose(k)
        if config.rel_pos_enabled:
            rel_k = ad.gather_rows(layer.rel_key, buckets)  # [L, T, d_head]
            scores = scores + ad.tsum(ad.reshape(q, (n_query, 1, d_head)) * rel_k, axis=-1)
        attn = ad.softmax(scores * inv_scale, axis=-1)
        z = attn @ v
        if config.rel_pos_enabled:
            rel_v = ad.gather_rows(layer.rel_value, buckets)
            z = z + ad.tsum(ad.reshape(attn, attn.shape + (1,)) * rel_v, axis=1)
        head_outputs.append(z)
    concat = head_outputs[0] if len(head_outputs) == 1 else ad.concat(head_outputs, axis=1)
    return concat @ layer.w_out


def _feed_forward(x: Tensor, layer: EncoderLayerParams) -> Tensor:
    return ad.gelu(x @ layer.ff_w1 + layer.ff_b1) @ layer.ff_w2 + layer.ff_b2


def encode_segment(
    params: EncoderParams,
    config: EncoderConfig,
    ids,
    mem: MemoryState | None = None,
) -> tuple[Tensor, MemoryState]:
    """Encode one segment, consuming and refreshing the recurrence memory.

    Each layer pre-normalizes, attends over [cached rows, segment rows] with
    queries from the segment only, then applies the feed-forward sublayer;
    both with residual connections. The refreshed memory holds the last
    ``mem_len`` input rows per layer, detached from the gradient graph.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot encode an empty segment")
    if ids.size > config.max_seq_len:
        raise ValueError(f"segment length {ids.size} exceeds max_seq_len {config.max_seq_len}")
    h = embed(params, ids)
    use_mem = config.mem_len > 0
    new_layers = []
    for li, layer in enumerate(params.layers):
        old_rows = mem.layers[li] if (use_mem and mem is not None and mem.layers) else None
        if use_mem:
            combined = (
                np.concatenate([old_rows, h.data], axis=0)
                if old_rows is not None and old_rows.shape[0]
                else h.data
            )
            new_layers.append(combined[-config.mem_len :].copy())
        mem_normed = None
        if old_rows is not None and old_rows.shape[0]:
            mem_normed = ad.layer_norm(Tensor(old_rows), layer.ln1_gain, layer.ln1_bias)
        h_normed = ad.layer_norm(h, layer.ln1_gain, layer.ln1_bias)
        h = h + rel_attention(h_normed, mem_normed, layer, config)
        h = h + _feed_forward(ad.layer_norm(h, layer.ln2_gain, layer.ln2_bias), layer)
    if not use_mem:
        new_layers = [np.zeros((0, config.d_model)) for _ in params.layers]
    return h, MemoryState(tuple(new_layers))


def encode_sequence(params: EncoderParams, config: EncoderConfig, ids) -> Tensor:
    """Encode arbitrarily long id sequences by chunking with carried memory."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot encode an empty sequence")
    mem = MemoryState.empty(config.n_layers, config.d_model)
    outputs = []
    for start in range(0, ids.size, config.max_seq_len):
        h, mem = encode_segment(params, config, ids[start : start + config.max_seq_len], mem)
        outputs.append(h)
    return outputs[0] if len(outputs) == 1 else ad.concat(outputs, axis=0)
