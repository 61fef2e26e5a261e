"""Rank-based evaluation of quality scores against known label errors.

All metrics depend only on the ordering the scores induce, never their
magnitudes. The score convention throughout: higher quality = less suspicious,
so the error detector is the negated score and "top" means lowest quality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, mark_errors
from .sentence_scores import ScoreConfig, score_all
from .token_scores import token_quality

UNITS = ("sentence", "token")

# Published reference readings for worst-token + self-confidence on the
# CoNLL-2003 test split scored against the CoNLL++ corrections, using
# externally trained transformer probabilities. They need those model files
# and so cannot be recomputed offline; they are recorded here as sanity
# anchors for anyone wiring up real predictions. Lift was reported at
# T = 184; the corrections flag 186 sentences on the unmerged label space.
REFERENCE_RESULTS = {
    "conll2003-bert": {"auprc": 0.4357, "lift_at_errors": 9.02, "top_t": 184},
    "conll2003-xlm": {"auprc": 0.4021},
    "conll2003-bert-unmerged": {"auprc": 0.4236},
}


@dataclass(frozen=True)
class EvalInput:
    """Scores (higher = better quality) plus ground-truth error flags."""

    scores: np.ndarray
    positives: np.ndarray
    unit: str = "sentence"

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        positives = np.asarray(self.positives, dtype=bool)
        if scores.ndim != 1 or positives.ndim != 1:
            raise ValueError("scores and positives must be 1-d")
        if len(scores) != len(positives):
            raise ValueError(f"{len(scores)} scores vs {len(positives)} positive flags")
        if len(scores) == 0:
            raise ValueError("nothing to evaluate")
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "positives", positives)

    @property
    def n_positives(self) -> int:
        return int(self.positives.sum())


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n, ties sharing the mean rank of their block."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    starts = np.flatnonzero(np.r_[True, v[1:] != v[:-1]])
    block_of = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(v)]))
    ends = np.r_[starts[1:], len(v)]  # exclusive, so block ranks are start+1..end
    mean_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(len(v))
    ranks[order] = mean_rank[block_of]
    return ranks


def auroc(e: EvalInput) -> float:
    """Probability a random error outranks a random clean item, ties half-credit."""
    n_pos = e.n_positives
    n_neg = len(e.scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative")
    detector_ranks = _average_ranks(-e.scores)
    u = detector_ranks[e.positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(e: EvalInput) -> float:
    """Average precision over the detector ranking, tied scores as one block."""
    n_pos = e.n_positives
    if n_pos == 0:
        raise ValueError("AUPRC needs at least one positive")
    order = np.argsort(e.scores, kind="stable")  # ascending quality = detector rank
    s = e.scores[order]
    p = e.positives[order]
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    block_of = np.repeat(np.arange(len(starts)), ends - starts)
    cum_pos = np.cumsum(p)
    precision_at_block = cum_pos[ends - 1] / ends
    return float(precision_at_block[block_of][p].sum() / n_pos)


def _top_indices(e: EvalInput, k: int) -> np.ndarray:
    # lowest quality first; ties resolved by ascending item index
    return np.argsort(e.scores, kind="stable")[:k]


def lift_at_errors(e: EvalInput, top_t: int | None = None) -> float:
    """How much denser errors are in the top-T suspects than overall."""
    n = len(e.scores)
    n_pos = e.n_positives
    if n_pos == 0:
        raise ValueError("lift needs at least one positive")
    t = n_pos if top_t is None else top_t
    if not 1 <= t <= n:
        raise ValueError(f"top-T must be in [1, {n}], got {t}")
    precision = float(e.positives[_top_indices(e, t)].mean())
    return precision / (n_pos / n)


def precision_at_k(e: EvalInput, ks: list[int]) -> list[tuple[int, float]]:
    """Error rate among the k most suspicious items, for each requested k."""
    n = len(e.scores)
    for k in ks:
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}], got {k}")
    cum = np.cumsum(e.positives[_top_indices(e, n)])
    return [(int(k), float(cum[k - 1] / k)) for k in ks]


@dataclass(frozen=True)
class NoiseMatrix:
    """Percentage of tokens of each true class that carry each wrong label.

    Cell (i, j) = 100 * |true=i, given=j, i != j| / |true=i|. Diagonal cells
    and rows for classes with no true tokens are NaN.
    """

    classes: tuple[str, ...]
    percentages: np.ndarray
    support: np.ndarray

    def row_error_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.nansum(self.percentages, axis=1) / 100.0


def noise_matrix(ds: Dataset) -> NoiseMatrix:
    missing = [s.id for s in ds.sentences if s.true_labels is None]
    if missing:
        raise ValueError(f"true labels missing for sentences {missing[:5]}")
    k = len(ds.label_space)
    counts = np.zeros((k, k), dtype=np.int64)
    for s in ds.sentences:
        np.add.at(counts, (np.asarray(s.true_labels), np.asarray(s.given_labels)), 1)
    support = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = 100.0 * counts / support[:, None]
    np.fill_diagonal(pct, np.nan)
    pct[support == 0] = np.nan
    return NoiseMatrix(classes=ds.label_space.classes, percentages=pct, support=support)


@dataclass(frozen=True)
class MetricReport:
    auroc: float
    auprc: float
    lift_at_errors: float
    precision_at_k: list[tuple[int, float]] = field(default_factory=list)
    n_positives: int = 0


def evaluate_scores(
    e: EvalInput, top_t: int | None = None, ks: list[int] | None = None
) -> MetricReport:
    return MetricReport(
        auroc=auroc(e),
        auprc=auprc(e),
        lift_at_errors=lift_at_errors(e, top_t),
        precision_at_k=precision_at_k(e, ks or []),
        n_positives=e.n_positives,
    )


def eval_input_for(
    ds: Dataset,
    method: str | None,
    token_method: str | None,
    cfg: ScoreConfig | None = None,
    unit: str = "sentence",
) -> EvalInput:
    """Build the (scores, positives) pair for one method against the truth.

    unit="token" evaluates the token quality scores directly (method is
    ignored there): positives are the individual mislabeled tokens.
    """
    if unit not in UNITS:
        raise ValueError(f"unit must be one of {UNITS}")
    sentence_flags, token_flags = mark_errors(ds)
    if unit == "token":
        if token_method is None:
            raise ValueError("token-level evaluation needs a token method")
        if not ds.has_probs:
            raise ValueError("token-level evaluation needs predicted probabilities")
        quality = [
            token_quality(token_method, p, s.given_labels)
            for p, s in zip(ds.probs, ds.sentences)
        ]
        return EvalInput(np.concatenate(quality), np.concatenate(token_flags), unit="token")

    if method is None:
        raise ValueError("sentence-level evaluation needs a sentence method")
    token_methods = [token_method] if token_method is not None else []
    records = score_all(ds, token_methods=token_methods, cfg=cfg, methods=[method])
    if len(records) != len(ds.sentences):
        raise ValueError(f"method {method!r} needs a token method")
    by_id = {r.sentence_id: r.score for r in records}
    scores = np.array([by_id[s.id] for s in ds.sentences])
    return EvalInput(scores, sentence_flags, unit="sentence")


def evaluate_method(
    ds: Dataset,
    method: str | None,
    token_method: str | None,
    cfg: ScoreConfig | None = None,
    unit: str = "sentence",
    top_t: int | None = None,
    ks: list[int] | None = None,
) -> MetricReport:
    """Score the dataset with one method and run all metrics on the result."""
    return evaluate_scores(eval_input_for(ds, method, token_method, cfg, unit), top_t, ks)
