"""Per-token label quality scores and confident-learning style error flags.

All scoring functions take an (n, K) probability matrix and the given label
indices, and return arrays aligned with the tokens. Quality values live in
[0, 1] with higher meaning the given label is more likely correct.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

TOKEN_METHODS = ("self-confidence", "normalized-margin", "cwe")


def _as_arrays(probs: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ValueError(f"shape mismatch: probs {probs.shape}, labels {labels.shape}")
    return probs, labels


def self_confidence(probs: np.ndarray, labels) -> np.ndarray:
    """q_i = predicted probability of the given label."""
    probs, labels = _as_arrays(probs, labels)
    return probs[np.arange(len(labels)), labels]


def normalized_margin(probs: np.ndarray, labels) -> np.ndarray:
    """Given-label probability minus the best competing class, mapped to [0, 1].

    The raw margin p_given - max_other lies in [-1, 1]; it is stored as
    (raw + 1) / 2 so all quality scores share the same range.
    """
    probs, labels = _as_arrays(probs, labels)
    if probs.shape[1] < 2:
        raise ValueError("normalized margin needs at least 2 classes")
    given = probs[np.arange(len(labels)), labels]
    masked = probs.copy()
    masked[np.arange(len(labels)), labels] = -np.inf
    raw = given - masked.max(axis=1)
    return (raw + 1.0) / 2.0


def normalized_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy per row, scaled by log K into [0, 1]; 0 log 0 := 0."""
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1) / np.log(k)


def confidence_weighted_entropy(probs: np.ndarray, labels) -> np.ndarray:
    """q_i = p_given / normalized entropy, clamped into [0, 1].

    Zero-entropy (one-hot) rows score 1 if the spike sits on the given label,
    else 0.
    """
    probs, labels = _as_arrays(probs, labels)
    given = probs[np.arange(len(labels)), labels]
    entropy = normalized_entropy(probs)
    q = np.empty(len(labels))
    degenerate = entropy == 0.0
    q[degenerate] = (given[degenerate] == 1.0).astype(np.float64)
    with np.errstate(divide="ignore"):
        q[~degenerate] = np.clip(given[~degenerate] / entropy[~degenerate], 0.0, 1.0)
    return q


_TOKEN_SCORERS = {
    "self-confidence": self_confidence,
    "normalized-margin": normalized_margin,
    "cwe": confidence_weighted_entropy,
}


def token_quality(method: str, probs: np.ndarray, labels) -> np.ndarray:
    """Dispatch on a token method name; see TOKEN_METHODS."""
    try:
        scorer = _TOKEN_SCORERS[method]
    except KeyError:
        raise ValueError(f"unknown token method {method!r}; choose one of {TOKEN_METHODS}") from None
    return scorer(probs, labels)


# ---------------------------------------------------------------------------
# Confident-learning flags
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassThresholds:
    """Per-class confidence thresholds: t_j = mean p_j over tokens labeled j.

    Classes with no labeled tokens are unusable and never enter a candidate set.
    """

    t: np.ndarray
    support: np.ndarray

    @property
    def usable(self) -> np.ndarray:
        return self.support > 0


def class_thresholds(prob_matrices: Iterable[np.ndarray], label_seqs: Iterable) -> ClassThresholds:
    """Dataset-wide reduction over all (probs, labels) sentence pairs."""
    sums = None
    counts = None
    for probs, labels in zip(prob_matrices, label_seqs):
        probs, labels = _as_arrays(probs, labels)
        if sums is None:
            k = probs.shape[1]
            sums = np.zeros(k)
            counts = np.zeros(k, dtype=np.int64)
        np.add.at(sums, labels, probs[np.arange(len(labels)), labels])
        np.add.at(counts, labels, 1)
    if sums is None:
        raise ValueError("no sentences to compute thresholds from")
    with np.errstate(invalid="ignore"):
        t = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return ClassThresholds(t=t, support=counts)


def flag_tokens(probs: np.ndarray, labels, thresholds: ClassThresholds) -> np.ndarray:
    """Flag token i when its most confident above-threshold class disagrees
    with the given label.

    Candidate classes are the usable j with p_ij >= t_j; the winner is the
    candidate with the highest probability (lowest index on ties). Tokens with
    no candidates are not flagged.
    """
    probs, labels = _as_arrays(probs, labels)
    t = np.where(thresholds.usable, thresholds.t, np.inf)
    candidates = probs >= t[np.newaxis, :]
    # argmax restricted to candidates; -inf elsewhere keeps lowest-index ties
    scores = np.where(candidates, probs, -np.inf)
    winners = scores.argmax(axis=1)
    has_candidate = candidates.any(axis=1)
    return has_candidate & (winners != labels)
