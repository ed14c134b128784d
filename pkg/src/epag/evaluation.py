"""Confusion matrix, per-class and macro metrics, report emission."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .classifier import N_CLASSES, predict_label
from .corpus import LabeledRecord, MoveLabel
from .model import MoveModel
from .tokenizer import SubwordVocab, encode

LABEL_NAMES = tuple(label.display_name for label in MoveLabel)


@dataclass(frozen=True)
class ConfusionMatrix:
    """5x5 integer counts; rows are gold labels, columns predictions."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if arr.shape != (N_CLASSES, N_CLASSES) or (arr < 0).any():
            raise ValueError("confusion matrix must be 5x5 and non-negative")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.array.sum())


@dataclass(frozen=True)
class MetricsReport:
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    support: tuple[int, ...]  # gold count per class
    total: int


def confusion(preds: list, golds: list) -> ConfusionMatrix:
    """Count (gold, predicted) pairs."""
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    if not preds:
        raise ValueError("cannot build a confusion matrix from no records")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for pred, gold in zip(preds, golds):
        counts[int(gold), int(pred)] += 1
    return ConfusionMatrix(tuple(tuple(int(v) for v in row) for row in counts))


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 with 0/0 defined as 0.

    Macro averages run over the classes present in gold or predictions;
    classes absent from both are excluded rather than counted as zeros.
    """
    arr = cm.array
    total = int(arr.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    row_sums = arr.sum(axis=1)
    col_sums = arr.sum(axis=0)
    precision, recall, f1 = [], [], []
    for c in range(N_CLASSES):
        tp = float(arr[c, c])
        p = tp / col_sums[c] if col_sums[c] else 0.0
        r = tp / row_sums[c] if row_sums[c] else 0.0
        f = 2 * p * r / (p + r) if (p + r) else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
    active = [c for c in range(N_CLASSES) if row_sums[c] + col_sums[c] > 0]
    return MetricsReport(
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        macro_precision=sum(precision[c] for c in active) / len(active),
        macro_recall=sum(recall[c] for c in active) / len(active),
        macro_f1=sum(f1[c] for c in active) / len(active),
        accuracy=float(np.trace(arr)) / total,
        support=tuple(int(v) for v in row_sums),
        total=total,
    )


def _thread_count() -> int:
    raw = os.environ.get("EPAG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def predict_records(
    model: MoveModel, vocab: SubwordVocab, records: list[LabeledRecord]
) -> list[int]:
    """Predicted label id per record, in input order."""

    def predict_one(rec: LabeledRecord) -> int:
        return predict_label(model.predict_probs(encode(vocab, rec.text).ids))

    threads = _thread_count()
    if threads == 1:
        return [predict_one(rec) for rec in records]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(predict_one, records))


def evaluate(
    model: MoveModel, vocab: SubwordVocab, records: list[LabeledRecord]
) -> MetricsReport:
    """Encode, classify and aggregate the records into a metrics report."""
    if not records:
        raise ValueError("cannot evaluate on an empty record list")
    preds = predict_records(model, vocab, records)
    golds = [int(rec.label) for rec in records]
    return metrics(confusion(preds, golds))


def report_rows(report: MetricsReport) -> list[tuple[str, float | int, bool]]:
    """(name, value, is_percentage) rows in emission order."""
    rows: list[tuple[str, float | int, bool]] = [
        ("accuracy", report.accuracy, True),
        ("macro_precision", report.macro_precision, True),
        ("macro_recall", report.macro_recall, True),
        ("macro_f1", report.macro_f1, True),
    ]
    for c, name in enumerate(LABEL_NAMES):
        rows.append((f"precision_{name}", report.precision[c], True))
        rows.append((f"recall_{name}", report.recall[c], True))
        rows.append((f"f1_{name}", report.f1[c], True))
    for c, name in enumerate(LABEL_NAMES):
        rows.append((f"support_{name}", report.support[c], False))
    rows.append(("total", report.total, False))
    return rows


def emit_report(report: MetricsReport, path, fmt: str = "tsv") -> None:
    """Write the report as TSV (percentages, 2 decimals) or JSON (raw)."""
    if fmt == "tsv":
        lines = []
        for name, value, is_pct in report_rows(report):
            rendered = f"{100.0 * value:.2f}" if is_pct else str(value)
            lines.append(f"{name}\t{rendered}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
