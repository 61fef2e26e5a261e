import numpy as np
import pytest

from tokenaudit.dataset import Dataset, TokenizedSentence
from tokenaudit.labels import LabelSpace, conll2003_space


def random_probs(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Random valid probability matrix (rows on the simplex)."""
    p = rng.dirichlet(np.ones(k), size=n)
    return p / p.sum(axis=1, keepdims=True)


def make_sentence(sid: int, labels, true_labels=None, tokens=None) -> TokenizedSentence:
    labels = tuple(labels)
    if tokens is None:
        tokens = tuple(f"w{sid}_{i}" for i in range(len(labels)))
    return TokenizedSentence(
        id=sid,
        tokens=tuple(tokens),
        given_labels=labels,
        true_labels=tuple(true_labels) if true_labels is not None else None,
    )


def make_dataset(space: LabelSpace, label_seqs, true_seqs=None, probs=None, seed=0) -> Dataset:
    """Dataset with random probabilities unless explicit matrices are given."""
    rng = np.random.default_rng(seed)
    k = len(space)
    sentences = []
    prob_list = []
    for i, labels in enumerate(label_seqs):
        true = true_seqs[i] if true_seqs is not None else None
        sentences.append(make_sentence(i, labels, true))
        prob_list.append(probs[i] if probs is not None else random_probs(rng, len(labels), k))
    return Dataset.from_sentences(space, sentences, prob_list)


@pytest.fixture
def conll_space() -> LabelSpace:
    return conll2003_space()


@pytest.fixture
def two_class() -> LabelSpace:
    return LabelSpace.from_names(["O", "ENT"])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
