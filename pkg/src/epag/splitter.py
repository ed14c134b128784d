"""Complex-sentence splitting driven by dependency parses.

A sentence is considered complex when a coordination (COO) token hangs
directly off the sentence head (HED); it is then cut right after the
nearest comma preceding that COO token, so each fragment carries a single
semantic move.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import LabeledRecord, clean_text

HEAD_REL = "HED"
COORD_REL = "COO"
PUNCT_REL = "WP"

# Only these comma forms can anchor a cut; other WP punctuation never does.
_SPLIT_COMMAS = {"，", ","}


class ConlluError(ValueError):
    """Malformed parse file or parse/sentence mismatch."""


@dataclass(frozen=True)
class DepToken:
    id: int
    form: str
    head: int
    rel: str


@dataclass(frozen=True)
class DepParse:
    tokens: tuple[DepToken, ...]

    def token(self, token_id: int) -> DepToken:
        return self.tokens[token_id - 1]


def _validate_parse(tokens: list[DepToken], block: int, first_line: int) -> DepParse:
    where = f"block {block} (line {first_line})"
    n = len(tokens)
    for i, tok in enumerate(tokens, start=1):
        if tok.id != i:
            raise ConlluError(f"{where}: token ids must be consecutive from 1")
        if not 0 <= tok.head <= n:
            raise ConlluError(f"{where}: head {tok.head} out of range")
        if tok.head == tok.id:
            raise ConlluError(f"{where}: token {tok.id} is its own head")
    heds = [t for t in tokens if t.rel == HEAD_REL]
    if len(heds) != 1:
        kind = "multiple HED" if heds else "no HED token"
        raise ConlluError(f"{where}: {kind}")
    roots = [t for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise ConlluError(f"{where}: expected exactly one root, got {len(roots)}")
    # Walking up from every token must reach the root without revisiting.
    for tok in tokens:
        seen = set()
        cur = tok.id
        while cur != 0:
            if cur in seen:
                raise ConlluError(f"{where}: cyclic dependency through token {tok.id}")
            seen.add(cur)
            cur = tokens[cur - 1].head
    return DepParse(tuple(tokens))


def parse_conllu(text: str) -> list[DepParse]:
    """Parse blank-line-separated dependency blocks.

    Each token line has 10 tab-separated columns; only ID, FORM, HEAD and
    DEPREL (columns 1, 2, 7, 8) are used. ``#`` lines are comments.
    """
    parses = []
    pending: list[DepToken] = []
    block = 1
    block_start = 0
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped:
            if pending:
                parses.append(_validate_parse(pending, block, block_start))
                pending = []
                block += 1
            continue
        if stripped.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(
                f"block {block} (line {lineno}): expected 10 columns, got {len(cols)}"
            )
        if not pending:
            block_start = lineno
        try:
            tok_id = int(cols[0])
            head = int(cols[6])
        except ValueError:
            raise ConlluError(
                f"block {block} (line {lineno}): non-numeric ID or HEAD"
            ) from None
        pending.append(DepToken(tok_id, cols[1], head, cols[7]))
    if pending:
        parses.append(_validate_parse(pending, block, block_start))
    return parses


def find_split_points(parse: DepParse) -> list[int]:
    """Ids of the comma tokens at which the sentence should be cut.

    For every COO token whose parent is the HED token, the nearest preceding
    WP comma is a cut point. COO tokens with no preceding comma contribute
    nothing.
    """
    points = set()
    for tok in parse.tokens:
        if tok.rel != COORD_REL or tok.head == 0:
            continue
        if parse.token(tok.head).rel != HEAD_REL:
            continue
        for prev in reversed(parse.tokens[: tok.id - 1]):
            if prev.rel == PUNCT_REL and prev.form in _SPLIT_COMMAS:
                points.add(prev.id)
                break
    return sorted(points)


def split_complex(sentence: str, parse: DepParse) -> list[str]:
    """Cut the sentence right after each split-point comma.

    The token forms must concatenate to the sentence (whitespace aside);
    returns [sentence] unchanged when there is nothing to split.
    """
    forms = [clean_text(tok.form) for tok in parse.tokens]
    if "".join(forms) != clean_text(sentence):
        raise ConlluError("token/sentence mismatch: parse does not cover sentence")
    points = find_split_points(parse)
    if not points:
        return [sentence]
    ends = []
    offset = 0
    for form in forms:
        offset += len(form)
        ends.append(offset)
    fragments = []
    start = 0
    for token_id in points:
        cut = ends[token_id - 1]
        fragments.append(sentence[start:cut])
        start = cut
    if start < len(sentence):
        fragments.append(sentence[start:])
    return fragments


def split_corpus(
    records: list[LabeledRecord], parses: list[DepParse]
) -> list[LabeledRecord]:
    """Replace each record by its fragments; fragments inherit the label.

    Fragment ids are ``<parent-id>.<k>`` with k counted from 1.
    """
    if len(records) != len(parses):
        raise ConlluError(
            f"alignment mismatch: {len(records)} records vs {len(parses)} parses"
        )
    out = []
    for rec, parse in zip(records, parses):
        for k, fragment in enumerate(split_complex(rec.text, parse), start=1):
            out.append(LabeledRecord(f"{rec.id}.{k}", fragment, rec.label))
    return out
