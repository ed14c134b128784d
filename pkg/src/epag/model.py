"""The full move-recognition model: encoder plus classifier head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .classifier import (
    ClassifierParams,
    attention_pool,
    bigru,
    classify,
    init_classifier_params,
)
from .encoder import EncoderConfig, EncoderParams, encode_sequence, init_encoder_params


@dataclass
class MoveModel:
    encoder_config: EncoderConfig
    d_hidden: int
    d_attn: int
    encoder: EncoderParams
    classifier: ClassifierParams
    metadata: dict = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        encoder_config: EncoderConfig,
        d_hidden: int = 64,
        d_attn: int = 0,
        seed: int = 0,
        metadata: dict | None = None,
    ) -> "MoveModel":
        if d_attn == 0:
            d_attn = 2 * d_hidden
        rng = np.random.default_rng(seed)
        encoder = init_encoder_params(encoder_config, rng)
        head = init_classifier_params(encoder_config.d_model, d_hidden, rng, d_attn)
        return cls(encoder_config, d_hidden, d_attn, encoder, head, metadata or {})

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.encoder.named_tensors()) + list(self.classifier.named_tensors())

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.grad = None

    def forward(self, ids) -> tuple[Tensor, Tensor]:
        """Per-token encoding, BiGRU, attention pooling, softmax.

        Returns (probabilities over the 5 labels, pooling weights).
        """
        encoded = encode_sequence(self.encoder, self.encoder_config, ids)
        states = bigru(self.classifier, encoded)
        pooled, weights = attention_pool(self.classifier, states)
        return classify(self.classifier, pooled), weights

    def predict_probs(self, ids) -> np.ndarray:
        from . import autodiff as ad

        with ad.no_grad():
            probs, _ = self.forward(ids)
        return probs.data
