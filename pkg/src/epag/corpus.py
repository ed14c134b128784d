"""Corpus ingestion: cleaning, sentence segmentation, labels, dataset I/O."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Characters stripped by clean_text: ASCII whitespace plus the full-width
# space, which is ubiquitous in Chinese text.
_STRIP_TABLE = {ord(c): None for c in " \t\r\n　"}

# A sentence ends after any of these delimiters.
SENTENCE_DELIMITERS = "。！？.!?"


class DatasetError(ValueError):
    """Malformed dataset file."""


class MoveLabel(enum.IntEnum):
    """The five rhetorical moves of an abstract sentence."""

    BACKGROUND = 0
    PURPOSE = 1
    METHOD = 2
    RESULT = 3
    CONCLUSION = 4

    @classmethod
    def from_int(cls, value: int) -> "MoveLabel":
        if not 0 <= value <= 4:
            raise ValueError(f"label out of range: {value}")
        return cls(value)

    @property
    def display_name(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class LabeledRecord:
    """One cleaned sentence with its move label."""

    id: str
    text: str
    label: MoveLabel


@dataclass(frozen=True)
class CorpusStats:
    sentence_count: int
    max_len: int
    mean_len: float


def clean_text(raw: str) -> str:
    """Remove space, tab, CR, LF and U+3000; keep everything else in order."""
    return raw.translate(_STRIP_TABLE)


def segment_sentences(abstract: str) -> list[str]:
    """Cut after each sentence-final delimiter; the delimiter stays attached.

    A trailing fragment without a delimiter is returned as-is, so joining the
    result always reproduces the input.
    """
    sentences = []
    start = 0
    for i, ch in enumerate(abstract):
        if ch in SENTENCE_DELIMITERS:
            sentences.append(abstract[start : i + 1])
            start = i + 1
    if start < len(abstract):
        sentences.append(abstract[start:])
    return sentences


def load_dataset(path: str | Path) -> list[LabeledRecord]:
    """Read a TSV dataset: one ``<text>\\t<label-int>`` record per line.

    Lines starting with ``#`` are comments. Text is cleaned on load; records
    whose text is empty after cleaning are dropped with a warning.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            if "\t" not in line:
                raise DatasetError(f"missing tab separator at line {lineno}")
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"expected exactly one tab at line {lineno}")
            text_raw, label_raw = parts
            try:
                label_int = int(label_raw)
            except ValueError:
                raise DatasetError(f"non-integer label at line {lineno}") from None
            if not 0 <= label_int <= 4:
                raise DatasetError(f"label out of range at line {lineno}")
            text = clean_text(text_raw)
            if not text:
                logger.warning("dropping record with empty text at line %d", lineno)
                continue
            records.append(LabeledRecord(str(lineno), text, MoveLabel(label_int)))
    return records


def save_dataset(records: list[LabeledRecord], path: str | Path) -> None:
    """Write records in the same TSV format load_dataset reads."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(f"{rec.text}\t{int(rec.label)}\n")


def split_train_test(
    records: list[LabeledRecord], ratio: float, seed: int
) -> tuple[list[LabeledRecord], list[LabeledRecord]]:
    """Seeded shuffle, then the first floor(ratio*n) records become train."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if not records:
        raise ValueError("cannot split an empty record list")
    order = np.random.default_rng(seed).permutation(len(records))
    shuffled = [records[i] for i in order]
    # epsilon guards against float products like 0.7*10 == 6.999...
    n_train = int(math.floor(ratio * len(records) + 1e-9))
    return shuffled[:n_train], shuffled[n_train:]


def corpus_stats(records: list[LabeledRecord]) -> CorpusStats:
    """Character-count statistics over the record texts."""
    if not records:
        return CorpusStats(0, 0, 0.0)
    lengths = [len(rec.text) for rec in records]
    return CorpusStats(len(lengths), max(lengths), sum(lengths) / len(lengths))
