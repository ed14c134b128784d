"""Loss, gradients, the optimization loop, gradient checking, checkpoints."""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .classifier import predict_label
from .corpus import LabeledRecord
from .encoder import EncoderConfig
from .model import MoveModel
from .tokenizer import SubwordVocab, encode

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"EPAG"
CHECKPOINT_VERSION = 1
_PROB_FLOOR = 1e-12


class CheckpointError(ValueError):
    """Corrupt or incompatible checkpoint file."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    grad_clip_norm: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    use_split_data: bool = False  # dataset-preparation flag, recorded in metadata

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass(frozen=True)
class Example:
    """A record encoded to token ids, ready for the model."""

    id: str
    ids: tuple[int, ...]
    label: int


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    accuracy: float


def encode_dataset(vocab: SubwordVocab, records: list[LabeledRecord]) -> list[Example]:
    return [
        Example(rec.id, encode(vocab, rec.text).ids, int(rec.label)) for rec in records
    ]


def cross_entropy(probs: Tensor, gold: int) -> Tensor:
    """Negative log-likelihood of the gold label, floored at 1e-12."""
    p = probs[gold]
    if p.data < _PROB_FLOOR:
        logger.warning("gold probability underflow (%.3g); clamping", float(p.data))
        p = ad.clamp_min(p, _PROB_FLOOR)
    return -ad.log(p)


def batch_loss(model: MoveModel, batch: list[Example]) -> tuple[Tensor, list[int]]:
    """Mean cross-entropy over the batch plus per-record predictions."""
    if not batch:
        raise ValueError("empty batch")
    losses = []
    preds = []
    for ex in batch:
        probs, _ = model.forward(ex.ids)
        loss = cross_entropy(probs, ex.label)
        if not np.isfinite(loss.data):
            raise ValueError(f"non-finite loss for record {ex.id}")
        losses.append(loss)
        preds.append(predict_label(probs.data))
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return total * (1.0 / len(losses)), preds


def backward(model: MoveModel, batch: list[Example]) -> tuple[dict, float, list[int]]:
    """Gradient of the mean batch loss for every parameter tensor.

    Tensors outside the active graph (e.g. relative tables with positional
    attention disabled) get zero gradients.
    """
    model.zero_grad()
    loss, preds = batch_loss(model, batch)
    loss.backward()
    grads = {}
    for name, tensor in model.named_parameters():
        grads[name] = (
            tensor.grad.copy() if tensor.grad is not None else np.zeros_like(tensor.data)
        )
    return grads, float(loss.data), preds


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale all gradients so the global norm is at most max_norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class AdamOptimizer:
    """First-order adaptive-moment updates with bias correction."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, model: MoveModel, grads: dict) -> None:
        cfg = self.cfg
        self.step_count += 1
        t = self.step_count
        for name, tensor in model.named_parameters():
            g = grads[name]
            m = self._m.setdefault(name, np.zeros_like(g))
            v = self._v.setdefault(name, np.zeros_like(g))
            m *= cfg.adam_beta1
            m += (1 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1 - cfg.adam_beta2) * g * g
            m_hat = m / (1 - cfg.adam_beta1 ** t)
            v_hat = v / (1 - cfg.adam_beta2 ** t)
            tensor.data -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def train(
    model: MoveModel, data: list[Example], cfg: TrainConfig
) -> tuple[MoveModel, list[EpochStats]]:
    """Seeded epochs of shuffled batches: forward, backward, clip, update.

    Accuracy and loss are accumulated from the forward passes made during
    the epoch, i.e. at the parameters current when each batch was visited.
    Fully deterministic for a fixed (data, cfg).
    """
    if not data:
        raise ValueError("empty training data")
    rng = np.random.default_rng(cfg.seed)
    optimizer = AdamOptimizer(cfg)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        loss_sum = 0.0
        hits = 0
        for start in range(0, len(data), cfg.batch_size):
            batch = [data[i] for i in order[start : start + cfg.batch_size]]
            grads, loss, preds = backward(model, batch)
            clip_gradients(grads, cfg.grad_clip_norm)
            optimizer.step(model, grads)
            loss_sum += loss * len(batch)
            hits += sum(p == ex.label for p, ex in zip(preds, batch))
        history.append(EpochStats(epoch, loss_sum / len(data), hits / len(data)))
    return model, history


@dataclass
class GradCheckReport:
    tolerance: float
    max_rel_errors: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(err < self.tolerance for err in self.max_rel_errors.values())

    def failing_tensors(self) -> list[str]:
        return [n for n, e in self.max_rel_errors.items() if e >= self.tolerance]

    def format_lines(self) -> list[str]:
        lines = []
        for name, err in sorted(self.max_rel_errors.items()):
            status = "ok" if err < self.tolerance else "FAIL"
            lines.append(f"{name}\t{err:.3e}\t{status}")
        lines.append(f"overall\t{'pass' if self.passed else 'fail'}")
        return lines


def grad_check(
    model: MoveModel, data: list[Example], eps: float = 1e-5, tol: float = 1e-4
) -> GradCheckReport:
    """Compare analytic gradients against central differences, elementwise.

    The relative-error denominator is floored at 1e-6 so finite-difference
    rounding noise on near-zero gradients cannot dominate.
    """
    if eps <= 0:
        raise ValueError("invalid step")
    grads, _, _ = backward(model, data)

    def loss_value() -> float:
        with ad.no_grad():
            loss, _ = batch_loss(model, data)
        return float(loss.data)

    errors = {}
    for name, tensor in model.named_parameters():
        analytic = grads[name].reshape(-1)
        flat = tensor.data.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_value()
            flat[i] = orig - eps
            lo = loss_value()
            flat[i] = orig
            numeric = (hi - lo) / (2 * eps)
            denom = max(abs(analytic[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
        errors[name] = worst
    return GradCheckReport(tol, errors)


def _manifest_and_payload(model: MoveModel) -> tuple[list[dict], bytes]:
    manifest = []
    payload = bytearray()
    for name, tensor in model.named_parameters():
        raw = tensor.data.astype("<f4").tobytes()
        manifest.append(
            {
                "name": name,
                "shape": list(tensor.data.shape),
                "offset": len(payload),
                "count": int(tensor.data.size),
            }
        )
        payload.extend(raw)
    return manifest, bytes(payload)


def save_checkpoint(model: MoveModel, path) -> None:
    """Write the binary checkpoint: magic, version, JSON header, f32 payload."""
    manifest, payload = _manifest_and_payload(model)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "encoder_config": asdict(model.encoder_config),
        "classifier_config": {"d_hidden": model.d_hidden, "d_attn": model.d_attn},
        "metadata": model.metadata,
        "manifest": manifest,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path) -> MoveModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("not an EPAG checkpoint")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header_len = struct.unpack("<Q", raw[8:16])[0]
    header_end = 16 + header_len
    if header_end > len(raw):
        raise CheckpointError("header length exceeds file size")
    try:
        header = json.loads(raw[16:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from None
    payload = raw[header_end:]

    encoder_config = EncoderConfig(**header["encoder_config"])
    cls_cfg = header["classifier_config"]
    model = MoveModel.create(
        encoder_config,
        d_hidden=cls_cfg["d_hidden"],
        d_attn=cls_cfg["d_attn"],
        seed=0,
        metadata=header.get("metadata", {}),
    )
    tensors = dict(model.named_parameters())
    manifest = header["manifest"]
    if {entry["name"] for entry in manifest} != set(tensors):
        raise CheckpointError("manifest does not match model parameters")
    expected_bytes = sum(entry["count"] * 4 for entry in manifest)
    if len(payload) != expected_bytes:
        raise CheckpointError("payload length mismatch")
    for entry in manifest:
        start = entry["offset"]
        end = start + entry["count"] * 4
        if end > len(payload):
            raise CheckpointError("payload length mismatch")
        values = np.frombuffer(payload[start:end], dtype="<f4").astype(np.float64)
        tensor = tensors[entry["name"]]
        if list(tensor.data.shape) != entry["shape"]:
            raise CheckpointError(f"shape mismatch for {entry['name']}")
        tensor.data = values.reshape(entry["shape"])
    return model
