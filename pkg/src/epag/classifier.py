"""Attention-pooled bidirectional GRU head over per-token encoder outputs.

A forward and a backward GRU read the token representations; their hidden
states are concatenated per position, pooled into a sentence vector by a
learned-context attention, and classified into the five move labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

N_CLASSES = 5


@dataclass
class GruCellParams:
    """Update/reset/candidate gates: input weights, state weights, biases."""

    w_update: Tensor
    u_update: Tensor
    b_update: Tensor
    w_reset: Tensor
    u_reset: Tensor
    b_reset: Tensor
    w_cand: Tensor
    u_cand: Tensor
    b_cand: Tensor

    @property
    def hidden_size(self) -> int:
        return self.u_update.shape[0]


@dataclass
class ClassifierParams:
    forward_cell: GruCellParams
    backward_cell: GruCellParams
    attn_w: Tensor  # [2*d_hidden, d_attn]
    attn_b: Tensor  # [d_attn]
    attn_context: Tensor  # [d_attn], the learned scoring vector
    out_w: Tensor  # [2*d_hidden, N_CLASSES]
    out_b: Tensor  # [N_CLASSES]

    def named_tensors(self):
        for direction, cell in (("fwd", self.forward_cell), ("bwd", self.backward_cell)):
            for gate in ("update", "reset", "cand"):
                yield f"classifier.{direction}.w_{gate}", getattr(cell, f"w_{gate}")
                yield f"classifier.{direction}.u_{gate}", getattr(cell, f"u_{gate}")
                yield f"classifier.{direction}.b_{gate}", getattr(cell, f"b_{gate}")
        yield "classifier.attn_w", self.attn_w
        yield "classifier.attn_b", self.attn_b
        yield "classifier.attn_context", self.attn_context
        yield "classifier.out_w", self.out_w
        yield "classifier.out_b", self.out_b


def _init_cell(d_input: int, d_hidden: int, rng: np.random.Generator) -> GruCellParams:
    def uniform(fan_in, *shape):
        bound = 1.0 / math.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape))

    return GruCellParams(
        w_update=uniform(d_input, d_input, d_hidden),
        u_update=uniform(d_hidden, d_hidden, d_hidden),
        b_update=Tensor(np.zeros(d_hidden)),
        w_reset=uniform(d_input, d_input, d_hidden),
        u_reset=uniform(d_hidden, d_hidden, d_hidden),
        b_reset=Tensor(np.zeros(d_hidden)),
        w_cand=uniform(d_input, d_input, d_hidden),
        u_cand=uniform(d_hidden, d_hidden, d_hidden),
        b_cand=Tensor(np.zeros(d_hidden)),
    )


def init_classifier_params(
    d_input: int, d_hidden: int, rng: np.random.Generator, d_attn: int = 0
) -> ClassifierParams:
    """Seeded uniform init, bounds scaled by each matrix's input width."""
    if d_attn == 0:
        d_attn = 2 * d_hidden
    d_pair = 2 * d_hidden

    def uniform(fan_in, *shape):
        bound = 1.0 / math.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape))

    return ClassifierParams(
        forward_cell=_init_cell(d_input, d_hidden, rng),
        backward_cell=_init_cell(d_input, d_hidden, rng),
        attn_w=uniform(d_pair, d_pair, d_attn),
        attn_b=Tensor(np.zeros(d_attn)),
        attn_context=uniform(d_attn, d_attn),
        out_w=uniform(d_pair, d_pair, N_CLASSES),
        out_b=Tensor(np.zeros(N_CLASSES)),
    )


def gru_cell(cell: GruCellParams, x_t: Tensor, h_prev: Tensor) -> Tensor:
    """One gated recurrent step; rows are [1, d] state/input vectors."""
    z = ad.sigmoid(x_t @ cell.w_update + h_prev @ cell.u_update + cell.b_update)
    r = ad.sigmoid(x_t @ cell.w_reset + h_prev @ cell.u_reset + cell.b_reset)
    candidate = ad.tanh(x_t @ cell.w_cand + (r * h_prev) @ cell.u_cand + cell.b_cand)
    return (1.0 - z) * h_prev + z * candidate


def _run_direction(cell: GruCellParams, rows: list[Tensor]) -> list[Tensor]:
    h = Tensor(np.zeros((1, cell.hidden_size)))
    states = []
    for x_t in rows:
        h = gru_cell(cell, x_t, h)
        states.append(h)
    return states


def bigru(params: ClassifierParams, encoded: Tensor) -> Tensor:
    """Concatenate forward and backward GRU states per position: [L, 2*d_h]."""
    length = encoded.shape[0]
    if length == 0:
        raise ValueError("bigru requires at least one input row")
    rows = [encoded[i : i + 1, :] for i in range(length)]
    fwd = _run_direction(params.forward_cell, rows)
    bwd = _run_direction(params.backward_cell, rows[::-1])[::-1]
    return ad.concat(
        [ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)], axis=0
    )


def attention_pool(params: ClassifierParams, states: Tensor) -> tuple[Tensor, Tensor]:
    """Weighted sum of the BiGRU rows; weights from the learned context vector."""
    projected = ad.tanh(states @ params.attn_w + params.attn_b)
    scores = projected @ params.attn_context
    weights = ad.softmax(scores, axis=-1)
    pooled = ad.reshape(weights, (1, weights.shape[0])) @ states
    return ad.reshape(pooled, (states.shape[1],)), weights


def classify(params: ClassifierParams, sentence_vec: Tensor) -> Tensor:
    """Probabilities over the five move labels."""
    return ad.softmax(sentence_vec @ params.out_w + params.out_b, axis=-1)


def predict_label(probs: np.ndarray) -> int:
    """Argmax with ties broken toward the lower label id."""
    return int(np.argmax(probs))
