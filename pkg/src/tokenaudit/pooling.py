"""Reduce subword-level predicted probabilities to word-level rows.

Model tokenizers split or join the dataset's word tokens; alignment is by
character-span overlap in the shared detokenized text, which covers both the
many-subwords-per-word case (pool the rows) and the one-subword-spanning-
several-words case (copy its row to each word).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import validate_prob_matrix

STRATEGIES = ("average", "weighted", "first")

Span = tuple[int, int]


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class SubwordProbs:
    """Character spans and an m x K probability row per subword token."""

    spans: tuple[Span, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if any(end <= start for start, end in self.spans):
            raise ValueError("subword spans must be non-empty")
        if list(self.spans) != sorted(self.spans):
            raise ValueError("subword spans must be sorted")
        validate_prob_matrix(self.values, len(self.spans), self.values.shape[1], where="subword probs")


@dataclass(frozen=True)
class Alignment:
    """For each word, the overlapping subwords as (subword index, overlap chars)."""

    per_word: tuple[tuple[tuple[int, int], ...], ...]

    def __post_init__(self) -> None:
        if any(len(hits) == 0 for hits in self.per_word):
            raise ValueError("every word needs at least one overlapping subword")


def _overlap(a: Span, b: Span) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def align(
    word_spans: list[Span] | tuple[Span, ...],
    subword_spans: list[Span] | tuple[Span, ...],
    words: list[str] | None = None,
) -> Alignment:
    """Match each word span to the subword spans it overlaps (half-open).

    ``words`` is used only to name the offending word in error messages.
    """
    per_word = []
    for w_idx, w_span in enumerate(word_spans):
        hits = tuple(
            (s_idx, ov)
            for s_idx, s_span in enumerate(subword_spans)
            if (ov := _overlap(w_span, s_span)) > 0
        )
        if not hits:
            label = repr(words[w_idx]) if words else f"index {w_idx}"
            raise AlignmentError(f"word {label} at span {w_span} overlaps no subword")
        per_word.append(hits)
    return Alignment(per_word=tuple(per_word))


def pool(sub: SubwordProbs, alignment: Alignment, strategy: str = "average") -> np.ndarray:
    """Build the word-level (n, K) probability matrix from subword rows.

    average: unweighted mean of the mapped rows.
    weighted: mean weighted by overlap character counts.
    first: the row of the lowest-index mapped subword.
    Rows are renormalized to sum exactly 1, guarding float drift.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose one of {STRATEGIES}")
    rows = []
    for hits in alignment.per_word:
        idx = [i for i, _ in hits]
        if max(idx) >= len(sub.spans):
            raise AlignmentError("alignment refers to subwords beyond the probability rows")
        if strategy == "first":
            row = sub.values[min(idx)].copy()
        elif strategy == "weighted":
            weights = np.asarray([ov for _, ov in hits], dtype=np.float64)
            row = weights @ sub.values[idx] / weights.sum()
        else:
            row = sub.values[idx].mean(axis=0)
        rows.append(row / row.sum())
    return np.asarray(rows)
