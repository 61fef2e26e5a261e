"""Sentence-level label quality scores.

Each method maps per-token evidence (predicted probabilities p, given labels
l, token quality q, error flags b) to one scalar per sentence; lower scores
mean the sentence more likely contains a mislabeled token. Reviewers work the
ranking from the bottom up.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .dataset import Dataset
from .token_scores import TOKEN_METHODS, class_thresholds, flag_tokens, token_quality


@dataclass(frozen=True)
class ScoreConfig:
    """Hyperparameters of the scoring methods (defaults are the tuned choices).

    tie_epsilon weights the secondary tie-break term of the bad-token-counts
    variants; product_offset keeps log(q + c) finite at q = 0; expected_depth
    is how many of the worst tokens the expected-* methods accumulate;
    flag_penalty is added to flagged tokens' quality in worst-token-min-alt;
    softmin_temperature controls how sharply worst-token-softmin focuses on
    the worst token.
    """

    tie_epsilon: float = 1e-4
    product_offset: float = 1e-3
    expected_depth: int = 2
    flag_penalty: float = 0.1
    softmin_temperature: float = 10.0 ** -1.5

    def __post_init__(self) -> None:
        if self.tie_epsilon <= 0 or self.product_offset <= 0 or self.softmin_temperature <= 0:
            raise ValueError("tie_epsilon, product_offset and softmin_temperature must be positive")
        if self.expected_depth < 1:
            raise ValueError("expected_depth must be >= 1")
        if self.flag_penalty < 0:
            raise ValueError("flag_penalty must be >= 0")


@dataclass(frozen=True)
class SentenceScoreRecord:
    sentence_id: int
    method: str
    token_method: str | None
    score: float
    worst_token_index: int | None = None


def predicted_difference(probs: np.ndarray, labels) -> float:
    """-(number of argmax/given disagreements), ties broken by how confident
    the strongest disagreement is; 0 when the model agrees everywhere."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    predicted = probs.argmax(axis=1)
    disagree = predicted != labels
    if not disagree.any():
        return 0.0
    top = probs[np.arange(len(labels)), predicted]
    return float(-disagree.sum() - top[disagree].max())


def bad_token_counts(flags) -> float:
    """-(number of flagged tokens)."""
    return float(-np.asarray(flags, dtype=np.float64).sum())


def _split_means(quality: np.ndarray, flags: np.ndarray, reduce) -> tuple[float, float]:
    # empty groups contribute 1, the best quality, so unflagged sentences
    # stay ahead of flagged ones
    flagged = quality[flags]
    clean = quality[~flags]
    return (
        float(reduce(flagged)) if flagged.size else 1.0,
        float(reduce(clean)) if clean.size else 1.0,
    )


def bad_token_counts_avg(quality, flags, cfg: ScoreConfig) -> float:
    """Flag count, ties broken by mean flagged quality, then mean clean quality."""
    quality = np.asarray(quality, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    flagged_term, clean_term = _split_means(quality, flags, np.mean)
    return float(-flags.sum()) + flagged_term + cfg.tie_epsilon * clean_term


def bad_token_counts_min(quality, flags, cfg: ScoreConfig) -> float:
    """Like bad_token_counts_avg but tie-breaking on minima."""
    quality = np.asarray(quality, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    flagged_term, clean_term = _split_means(quality, flags, np.min)
    return float(-flags.sum()) + flagged_term + cfg.tie_epsilon * clean_term


def good_fraction(flags) -> float:
    """-(fraction of tokens flagged); rank-equivalent to the unflagged fraction."""
    flags = np.asarray(flags, dtype=np.float64)
    return float(-flags.mean())


def penalize_bad_tokens(quality, flags) -> float:
    """1 - mean over tokens of flag * (1 - quality)."""
    quality = np.asarray(quality, dtype=np.float64)
    flags = np.asarray(flags, dtype=np.float64)
    return float(1.0 - (flags * (1.0 - quality)).mean())


def average_quality(quality) -> float:
    return float(np.mean(quality))


def product_quality(quality, cfg: ScoreConfig) -> float:
    """Sum of log(q + offset): a product score that lets every token count but
    weighs low-quality tokens most."""
    quality = np.asarray(quality, dtype=np.float64)
    return float(np.log(quality + cfg.product_offset).sum())


def expected_bad(quality, cfg: ScoreConfig) -> float:
    """Sum of j * (j-th lowest quality) for j = 1..min(n, depth): a rough
    proxy for how many mislabeled tokens to expect."""
    q_sorted = np.sort(np.asarray(quality, dtype=np.float64))
    depth = min(len(q_sorted), cfg.expected_depth)
    j = np.arange(1, depth + 1)
    return float((j * q_sorted[:depth]).sum())


def expected_alt(quality, cfg: ScoreConfig) -> float:
    """Sum of the depth lowest qualities: the chance of any error at all."""
    q_sorted = np.sort(np.asarray(quality, dtype=np.float64))
    depth = min(len(q_sorted), cfg.expected_depth)
    return float(q_sorted[:depth].sum())


def worst_token(quality) -> tuple[float, int]:
    """Minimum token quality and its index (lowest index on ties)."""
    quality = np.asarray(quality, dtype=np.float64)
    idx = int(quality.argmin())
    return float(quality[idx]), idx


def worst_token_min_alt(quality, flags, cfg: ScoreConfig) -> tuple[float, int]:
    """Worst token after adding flag_penalty to flagged tokens' quality."""
    penalized = np.asarray(quality, dtype=np.float64) + cfg.flag_penalty * np.asarray(flags, dtype=np.float64)
    idx = int(penalized.argmin())
    return float(penalized[idx]), idx


def worst_token_softmin(quality, cfg: ScoreConfig) -> tuple[float, int]:
    """<q, softmax((1 - q) / t)>: a soft minimum that still hears the other
    tokens. Small t recovers worst_token, large t recovers average_quality."""
    quality = np.asarray(quality, dtype=np.float64)
    z = (1.0 - quality) / cfg.softmin_temperature
    z -= z.max()  # stability for tiny temperatures
    weights = np.exp(z)
    weights /= weights.sum()
    return float(quality @ weights), int(quality.argmin())


# ---------------------------------------------------------------------------
# Method registry and the dataset-level driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MethodSpec:
    name: str
    uses_quality: bool
    uses_flags: bool
    has_worst_index: bool = False
    # Appendix-grade variants are excluded from the default "all" sweep
    variant: bool = False


METHODS: dict[str, MethodSpec] = {
    spec.name: spec
    for spec in [
        MethodSpec("predicted-difference", uses_quality=False, uses_flags=False),
        MethodSpec("bad-token-counts", uses_quality=False, uses_flags=True),
        MethodSpec("bad-token-counts-avg", uses_quality=True, uses_flags=True),
        MethodSpec("bad-token-counts-min", uses_quality=True, uses_flags=True),
        MethodSpec("good-fraction", uses_quality=False, uses_flags=True),
        MethodSpec("average-quality", uses_quality=True, uses_flags=False),
        MethodSpec("penalize-bad-tokens", uses_quality=True, uses_flags=True),
        MethodSpec("product", uses_quality=True, uses_flags=False),
        MethodSpec("expected-bad", uses_quality=True, uses_flags=False),
        MethodSpec("expected-alt", uses_quality=True, uses_flags=False),
        MethodSpec("worst-token", uses_quality=True, uses_flags=False, has_worst_index=True),
        MethodSpec("worst-token-min-alt", uses_quality=True, uses_flags=True, has_worst_index=True, variant=True),
        MethodSpec("worst-token-softmin", uses_quality=True, uses_flags=False, has_worst_index=True, variant=True),
    ]
}


def score_sentence(
    method: str,
    probs: np.ndarray,
    labels,
    quality: np.ndarray | None = None,
    flags: np.ndarray | None = None,
    cfg: ScoreConfig | None = None,
) -> tuple[float, int | None]:
    """Score one sentence with the named method; returns (score, worst index)."""
    cfg = cfg or ScoreConfig()
    spec = METHODS.get(method)
    if spec is None:
        raise ValueError(f"unknown method {method!r}; choose one of {sorted(METHODS)}")
    if spec.uses_quality and quality is None:
        raise ValueError(f"{method} needs token quality scores")
    if spec.uses_flags and flags is None:
        raise ValueError(f"{method} needs token error flags")

    if method == "predicted-difference":
        return predicted_difference(probs, labels), None
    if method == "bad-token-counts":
        return bad_token_counts(flags), None
    if method == "bad-token-counts-avg":
        return bad_token_counts_avg(quality, flags, cfg), None
    if method == "bad-token-counts-min":
        return bad_token_counts_min(quality, flags, cfg), None
    if method == "good-fraction":
        return good_fraction(flags), None
    if method == "penalize-bad-tokens":
        return penalize_bad_tokens(quality, flags), None
    if method == "average-quality":
        return average_quality(quality), None
    if method == "product":
        return product_quality(quality, cfg), None
    if method == "expected-bad":
        return expected_bad(quality, cfg), None
    if method == "expected-alt":
        return expected_alt(quality, cfg), None
    if method == "worst-token":
        return worst_token(quality)
    if method == "worst-token-min-alt":
        return worst_token_min_alt(quality, flags, cfg)
    return worst_token_softmin(quality, cfg)


@dataclass
class ScoredDataset:
    """Token-level evidence computed once and shared by all sentence methods."""

    dataset: Dataset
    quality: dict[str, list[np.ndarray]] = field(default_factory=dict)
    flags: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def build(cls, ds: Dataset, token_methods: Iterable[str] = TOKEN_METHODS) -> "ScoredDataset":
        if not ds.has_probs:
            missing = [s.id for s in ds.sentences if ds.probs[ds.by_id()[s.id]] is None]
            raise ValueError(f"probabilities missing for sentences {missing[:5]}")
        labels = [s.given_labels for s in ds.sentences]
        thresholds = class_thresholds(ds.probs, labels)
        flags = [flag_tokens(p, l, thresholds) for p, l in zip(ds.probs, labels)]
        quality = {
            m: [token_quality(m, p, l) for p, l in zip(ds.probs, labels)]
            for m in token_methods
        }
        return cls(dataset=ds, quality=quality, flags=flags)


def score_all(
    ds: Dataset,
    token_methods: Iterable[str] | None = None,
    cfg: ScoreConfig | None = None,
    methods: Iterable[str] | None = None,
    include_variants: bool = False,
) -> list[SentenceScoreRecord]:
    """Score every sentence with every applicable (method, token method) pair.

    Methods that ignore token quality are emitted once with token_method None.
    Records are ordered by (method, token_method, sentence id).
    """
    cfg = cfg or ScoreConfig()
    token_methods = tuple(token_methods) if token_methods is not None else TOKEN_METHODS
    if methods is None:
        selected = [m for m, s in METHODS.items() if include_variants or not s.variant]
    else:
        selected = list(methods)
        for m in selected:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose one of {sorted(METHODS)}")

    if not ds.sentences:
        return []
    scored = ScoredDataset.build(ds, token_methods)

    records: list[SentenceScoreRecord] = []
    for method in selected:
        spec = METHODS[method]
        pairs = [(method, t) for t in token_methods] if spec.uses_quality else [(method, None)]
        for _, token_method in pairs:
            for i, sent in enumerate(ds.sentences):
                quality = scored.quality[token_method][i] if token_method else None
                score, worst = score_sentence(
                    method,
                    ds.probs[i],
                    sent.given_labels,
                    quality=quality,
                    flags=scored.flags[i],
                    cfg=cfg,
                )
                records.append(
                    SentenceScoreRecord(
                        sentence_id=sent.id,
                        method=method,
                        token_method=token_method,
                        score=score,
                        worst_token_index=worst if spec.has_worst_index else None,
                    )
                )
    records.sort(key=lambda r: (r.method, r.token_method or "", r.sentence_id))
    return records
