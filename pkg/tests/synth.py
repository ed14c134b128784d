"""Synthetic corpora and dependency parses used across the test suite."""

from __future__ import annotations

import numpy as np

from epag.corpus import LabeledRecord, MoveLabel
from epag.splitter import DepParse, DepToken

_WORD_ALPHABET = "模型方法实验结果分析系统数据特征网络性能提出改进验证研究设计"
_TEXT_RELS = ["SBV", "VOB", "ATT", "ADV", "POB", "COO"]
_WP_FORMS = ["，", "、", "；", "。"]

# Disjoint character inventories so classes are separable by token motifs.
CLASS_ALPHABETS = [
    "甲乙丙丁戊",
    "己庚辛壬癸",
    "子丑寅卯辰",
    "巳午未申酉",
    "戌亥风花雪",
]


def random_parse(rng: np.random.Generator) -> tuple[str, DepParse]:
    """A random valid parse and the sentence its token forms spell out.

    The tree is built over a random topological order, so it is always
    acyclic with a single root, which is also the HED token.
    """
    n = int(rng.integers(1, 13))
    order = rng.permutation(n)
    rank = {int(tok): pos for pos, tok in enumerate(order)}
    hed_index = int(order[0])

    tokens = []
    for i in range(n):
        if i == hed_index:
            form = "".join(rng.choice(list(_WORD_ALPHABET), size=2))
            head, rel = 0, "HED"
        else:
            earlier = [j for j in range(n) if rank[j] < rank[i]]
            head = int(rng.choice(earlier)) + 1
            if rng.random() < 0.3:
                rel = "WP"
                form = str(rng.choice(_WP_FORMS))
            else:
                rel = str(rng.choice(_TEXT_RELS))
                size = int(rng.integers(1, 4))
                form = "".join(rng.choice(list(_WORD_ALPHABET), size=size))
        tokens.append(DepToken(i + 1, form, head, rel))
    sentence = "".join(t.form for t in tokens)
    return sentence, DepParse(tuple(tokens))


def class_fragment(rng: np.random.Generator, label: int, length: int) -> str:
    """A sentence fragment built from one class's private alphabet.

    Each class repeats a two-character motif, so subword training picks it
    up and the classifier has an unambiguous signal.
    """
    alphabet = CLASS_ALPHABETS[label]
    motif = alphabet[:2]
    chars = []
    while len(chars) < length:
        if rng.random() < 0.6:
            chars.extend(motif)
        else:
            chars.append(str(rng.choice(list(alphabet))))
    return "".join(chars[:length])


def separable_corpus(
    rng: np.random.Generator, per_class: int = 50, min_len: int = 6, max_len: int = 14
) -> list[LabeledRecord]:
    """A five-class corpus with disjoint per-class character inventories."""
    records = []
    for label in range(5):
        for k in range(per_class):
            length = int(rng.integers(min_len, max_len + 1))
            text = class_fragment(rng, label, length)
            records.append(LabeledRecord(f"{label}-{k}", text, MoveLabel(label)))
    return records


# Shared neutral filler plus two private signature characters per class;
# clause content is mostly filler with signature bigrams dropped in at
# random positions.
_COMPOUND_FILLER = "的是在了和与对中上为"
_COMPOUND_SIG_CHARS = "甲乙丙丁戊己庚辛壬癸"


def diluted_fragment(
    rng: np.random.Generator, label: int, length: int, n_sig: int
) -> str:
    a = _COMPOUND_SIG_CHARS[2 * label]
    b = _COMPOUND_SIG_CHARS[2 * label + 1]
    bigrams = [a + b, b + a]
    chars = [str(rng.choice(list(_COMPOUND_FILLER))) for _ in range(length)]
    positions = rng.choice(length - 1, size=min(n_sig, length - 1), replace=False)
    for p in sorted(positions):
        bg = bigrams[int(rng.integers(2))]
        chars[p] = bg[0]
        chars[p + 1] = bg[1]
    return "".join(chars)


def compound_corpus(
    rng: np.random.Generator, per_class: int = 50
) -> tuple[list[LabeledRecord], list[DepParse], list[LabeledRecord]]:
    """Compound sentences labeled by their leading clause, plus clean eval data.

    Each training sentence concatenates a faintly-marked leading clause of
    one class (one signature bigram among neutral filler) and a loudly-marked
    trailing clause of a different class (four signature bigrams), joined by
    a comma; its label is the leading clause's class, so the trailing clause
    is a distractor that dominates pooled evidence unless the sentence is
    split. The matching parse marks the junction for the dependency-rule
    splitter: leading clause as the HED token, the comma as WP, and the
    trailing clause as a COO token whose parent is the HED. The evaluation
    records are clean single clauses in the split corpus's own shape
    (comma-terminated), labeled with their own class.
    """
    records, parses, eval_records = [], [], []
    for label in range(5):
        for k in range(per_class):
            other = int((label + 1 + rng.integers(4)) % 5)
            first = diluted_fragment(rng, label, int(rng.integers(10, 17)), 1)
            second = diluted_fragment(rng, other, int(rng.integers(10, 17)), 4)
            text = first + "，" + second
            records.append(LabeledRecord(f"c{label}-{k}", text, MoveLabel(label)))
            parses.append(
                DepParse(
                    (
                        DepToken(1, first, 0, "HED"),
                        DepToken(2, "，", 1, "WP"),
                        DepToken(3, second, 1, "COO"),
                    )
                )
            )
            eval_text = diluted_fragment(rng, label, int(rng.integers(10, 17)), 1)
            eval_records.append(
                LabeledRecord(f"e{label}-{k}", eval_text + "，", MoveLabel(label))
            )
    return records, parses, eval_records
