"""Data model for token classification datasets and CoNLL/IOB2 ingestion.

Sentences are immutable after construction; transformations return new objects.
Probability matrices are plain float64 numpy arrays of shape (n, K) whose rows
sum to 1.
"""

from __future__ import annotations

import io as _io
from dataclasses import dataclass, replace
from typing import Iterable, TextIO

import numpy as np

from .labels import LabelSpace

PROB_ROW_TOL = 1e-6

# Detokenization cleanup: drop the space before these characters ...
NO_SPACE_BEFORE = frozenset(",.;:!?)’”")
# ... and after these.
NO_SPACE_AFTER = frozenset("(‘“")


class ConllParseError(ValueError):
    """Malformed CoNLL input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class TokenizedSentence:
    """One sentence with word-level tokens and per-token class labels.

    ``char_spans`` are half-open [start, end) intervals into the detokenized
    sentence text; they are absent until detokenization assigns them.
    ``true_labels`` are ground-truth corrections, when known.
    """

    id: int
    tokens: tuple[str, ...]
    given_labels: tuple[int, ...]
    true_labels: tuple[int, ...] | None = None
    char_spans: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        n = len(self.tokens)
        if n < 1:
            raise ValueError(f"sentence {self.id}: needs at least one token")
        if len(self.given_labels) != n:
            raise ValueError(f"sentence {self.id}: {len(self.given_labels)} labels for {n} tokens")
        if self.true_labels is not None and len(self.true_labels) != n:
            raise ValueError(f"sentence {self.id}: {len(self.true_labels)} true labels for {n} tokens")
        if self.char_spans is not None:
            if len(self.char_spans) != n:
                raise ValueError(f"sentence {self.id}: {len(self.char_spans)} spans for {n} tokens")
            prev_end = 0
            for start, end in self.char_spans:
                if start < prev_end or end <= start:
                    raise ValueError(f"sentence {self.id}: char_spans must be increasing and non-overlapping")
                prev_end = end

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        """Detokenized sentence text reconstructed from tokens and spans."""
        if self.char_spans is None:
            return " ".join(self.tokens)
        chars = [" "] * self.char_spans[-1][1]
        for token, (start, _) in zip(self.tokens, self.char_spans):
            chars[start : start + len(token)] = token
        return "".join(chars)

    def check_labels(self, space: LabelSpace) -> None:
        k = len(space)
        for seq in (self.given_labels, self.true_labels or ()):
            for lab in seq:
                if not 0 <= lab < k:
                    raise ValueError(f"sentence {self.id}: label index {lab} outside 0..{k - 1}")


def validate_prob_matrix(probs: np.ndarray, n: int, k: int, where: str = "prob matrix") -> np.ndarray:
    """Check shape, finiteness, non-negativity and row sums; returns float64 view."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (n, k):
        raise ValueError(f"{where}: expected shape ({n}, {k}), got {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise ValueError(f"{where}: non-finite entries")
    if np.any(probs < 0):
        raise ValueError(f"{where}: negative entries")
    row_sums = probs.sum(axis=1)
    bad = np.abs(row_sums - 1.0) > PROB_ROW_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(f"{where}: row {i} sums to {row_sums[i]:.8f}, not 1")
    return probs


@dataclass(frozen=True)
class Dataset:
    """Sentences plus (optionally) per-sentence predicted probability matrices.

    ``probs`` is parallel to ``sentences``; entries may be None for label-only
    workflows (error marking, noise analysis). Scoring requires probabilities.
    """

    label_space: LabelSpace
    sentences: tuple[TokenizedSentence, ...]
    probs: tuple[np.ndarray | None, ...]

    def __post_init__(self) -> None:
        if len(self.probs) != len(self.sentences):
            raise ValueError("probs must be parallel to sentences")
        ids = [s.id for s in self.sentences]
        if len(set(ids)) != len(ids):
            raise ValueError("sentence ids must be unique")
        k = len(self.label_space)
        for sent, p in zip(self.sentences, self.probs):
            sent.check_labels(self.label_space)
            if p is not None:
                validate_prob_matrix(p, sent.n, k, where=f"sentence {sent.id} probs")

    @classmethod
    def from_sentences(
        cls,
        label_space: LabelSpace,
        sentences: Iterable[TokenizedSentence],
        probs: Iterable[np.ndarray | None] | None = None,
    ) -> "Dataset":
        sentences = tuple(sentences)
        if probs is None:
            probs = (None,) * len(sentences)
        return cls(label_space=label_space, sentences=sentences, probs=tuple(probs))

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def has_probs(self) -> bool:
        return all(p is not None for p in self.probs)

    @property
    def has_truth(self) -> bool:
        return all(s.true_labels is not None for s in self.sentences)

    def by_id(self) -> dict[int, int]:
        """Map sentence id -> positional index."""
        return {s.id: i for i, s in enumerate(self.sentences)}


# ---------------------------------------------------------------------------
# CoNLL column format
# ---------------------------------------------------------------------------

def parse_conll(text: str | TextIO, label_space: LabelSpace) -> list[TokenizedSentence]:
    """Parse CoNLL column text: one token per line, label in the last column.

    Blank lines separate sentences; "-DOCSTART-" lines are document markers and
    are skipped. Extra middle columns (POS, chunk) are discarded. Sentence ids
    are assigned sequentially in file order and stay stable through later
    filtering. char_spans are left unset; detokenization assigns them.
    """
    if isinstance(text, str):
        text = _io.StringIO(text)
    sentences: list[TokenizedSentence] = []
    tokens: list[str] = []
    labels: list[int] = []

    def flush() -> None:
        if tokens:
            sentences.append(
                TokenizedSentence(
                    id=len(sentences),
                    tokens=tuple(tokens),
                    given_labels=tuple(labels),
                )
            )
            tokens.clear()
            labels.clear()

    for line_no, raw in enumerate(text, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("-DOCSTART-"):
            flush()
            continue
        fields = line.split()
        if len(fields) < 2:
            raise ConllParseError(line_no, f"no label column in {line!r}")
        token, label = fields[0], fields[-1]
        try:
            labels.append(label_space.index(label))
        except KeyError:
            raise ConllParseError(line_no, f"label {label!r} not in label space") from None
        tokens.append(token)
    flush()
    return sentences


def serialize_conll(sentences: Iterable[TokenizedSentence], label_space: LabelSpace) -> str:
    """Render sentences back to two-column CoNLL text (token, label)."""
    blocks = []
    for sent in sentences:
        lines = [
            f"{tok} {label_space.name(lab)}"
            for tok, lab in zip(sent.tokens, sent.given_labels)
        ]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def attach_true_labels(
    sentences: list[TokenizedSentence], corrected: list[TokenizedSentence]
) -> list[TokenizedSentence]:
    """Copy labels of a corrected parallel corpus into ``true_labels``.

    Both lists must align sentence-by-sentence with identical tokens; the
    corrected file is assumed to change labels only.
    """
    if len(sentences) != len(corrected):
        raise ValueError(
            f"corpora differ in length: {len(sentences)} vs {len(corrected)} sentences"
        )
    out = []
    for sent, fixed in zip(sentences, corrected):
        if sent.tokens != fixed.tokens:
            raise ValueError(f"sentence {sent.id}: tokens differ from corrected corpus")
        out.append(replace(sent, true_labels=fixed.given_labels))
    return out


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def _recase_all_caps(token: str) -> str:
    """JAPAN -> Japan. Applies to tokens with >= 2 letters, all uppercase."""
    letters = [c for c in token if c.isalpha()]
    if len(letters) >= 2 and all(c.isupper() for c in letters):
        return token[0] + token[1:].lower()
    return token


def detokenize(tokens: Iterable[str]) -> tuple[str, tuple[tuple[int, int], ...]]:
    """Join tokens with single spaces, then apply punctuation spacing cleanup.

    No space is emitted before a token starting with one of NO_SPACE_BEFORE or
    after a token ending with one of NO_SPACE_AFTER. Returns the text and the
    per-token half-open character spans within it.
    """
    parts: list[str] = []
    spans: list[tuple[int, int]] = []
    pos = 0
    prev = None
    for token in tokens:
        if prev is not None and token[:1] not in NO_SPACE_BEFORE and prev[-1:] not in NO_SPACE_AFTER:
            parts.append(" ")
            pos += 1
        parts.append(token)
        spans.append((pos, pos + len(token)))
        pos += len(token)
        prev = token
    return "".join(parts), tuple(spans)


def preprocess(sentences: Iterable[TokenizedSentence]) -> list[TokenizedSentence]:
    """Apply the standard cleanup: recase all-caps tokens, detokenize with
    punctuation-aware spacing, and drop sentences that are <= 1 character long
    or contain "#" (reserved by subword tokenizers). Ids are preserved.
    """
    kept = []
    for sent in sentences:
        tokens = tuple(_recase_all_caps(t) for t in sent.tokens)
        text, spans = detokenize(tokens)
        if len(text) <= 1 or "#" in text:
            continue
        kept.append(replace(sent, tokens=tokens, char_spans=spans))
    return kept


# ---------------------------------------------------------------------------
# Prefix merging and error marking
# ---------------------------------------------------------------------------

def merge_prefixes(ds: Dataset) -> Dataset:
    """Collapse B-X/I-X label classes into X across the whole dataset.

    Labels are remapped and, for each sentence with probabilities, columns of
    merged classes are summed (row sums are preserved exactly up to float
    addition). Raises if the space has no prefixes left to merge.
    """
    merged_space, mapping = ds.label_space.merged()
    k_new = len(merged_space)
    map_arr = np.asarray(mapping)

    def remap(labels: tuple[int, ...] | None) -> tuple[int, ...] | None:
        if labels is None:
            return None
        return tuple(mapping[lab] for lab in labels)

    sentences = tuple(
        replace(s, given_labels=remap(s.given_labels), true_labels=remap(s.true_labels))
        for s in ds.sentences
    )
    probs: list[np.ndarray | None] = []
    for p in ds.probs:
        if p is None:
            probs.append(None)
            continue
        merged = np.zeros((p.shape[0], k_new), dtype=np.float64)
        np.add.at(merged, (slice(None), map_arr), p)
        probs.append(merged)
    return Dataset(label_space=merged_space, sentences=sentences, probs=tuple(probs))


def mark_errors(ds: Dataset) -> tuple[np.ndarray, list[np.ndarray]]:
    """Compare given labels against ground truth.

    Returns (per-sentence bool array, list of per-token bool arrays): a token
    is an error iff given != true, a sentence iff any of its tokens is.
    """
    if not ds.has_truth:
        missing = [s.id for s in ds.sentences if s.true_labels is None]
        raise ValueError(f"true labels missing for sentences {missing[:5]}{'...' if len(missing) > 5 else ''}")
    token_flags = [
        np.asarray(s.given_labels) != np.asarray(s.true_labels) for s in ds.sentences
    ]
    sentence_flags = np.asarray([bool(f.any()) for f in token_flags])
    return sentence_flags, token_flags
