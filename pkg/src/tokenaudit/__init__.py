"""Find, rank and review likely label errors in token classification data."""

from .dataset import ConllParseError, Dataset, TokenizedSentence, mark_errors, merge_prefixes, parse_conll, preprocess
from .labels import CONLL2003_CLASSES, LabelSpace, conll2003_space
from .metrics import (
    REFERENCE_RESULTS,
    EvalInput,
    MetricReport,
    auprc,
    auroc,
    evaluate_method,
    lift_at_errors,
    noise_matrix,
    precision_at_k,
)
from .pooling import Alignment, AlignmentError, SubwordProbs, align, pool
from .sentence_scores import METHODS, ScoreConfig, SentenceScoreRecord, score_all, score_sentence
from .token_scores import TOKEN_METHODS, class_thresholds, flag_tokens, token_quality

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "Alignment",
    "CONLL2003_CLASSES",
    "ConllParseError",
    "Dataset",
    "EvalInput",
    "LabelSpace",
    "METHODS",
    "MetricReport",
    "REFERENCE_RESULTS",
    "ScoreConfig",
    "SentenceScoreRecord",
    "SubwordProbs",
    "TOKEN_METHODS",
    "TokenizedSentence",
    "align",
    "auprc",
    "auroc",
    "class_thresholds",
    "conll2003_space",
    "evaluate_method",
    "flag_tokens",
    "lift_at_errors",
    "mark_errors",
    "merge_prefixes",
    "noise_matrix",
    "parse_conll",
    "pool",
    "precision_at_k",
    "preprocess",
    "score_all",
    "score_sentence",
    "token_quality",
]
