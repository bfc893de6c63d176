"""Topic coherence via NPMI context vectors (the C_V measure).

Pipeline: boolean sliding-window co-occurrence counts over a reference
corpus (window width 110; shorter documents form a single window), NPMI
between each pair of a topic's top words, one-set segmentation, and the
mean cosine between every word's NPMI vector and the summed topic
vector. The final score averages over topics.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .textprep import CleanDoc
from .topics import TopicModel, top_words

__all__ = ["InsufficientReference", "coherence_cv", "cv_for_word_sets"]

WINDOW_WIDTH = 110
LOG_EPS = 1e-12


class InsufficientReference(ValueError):
    """A top word never occurs in the reference corpus."""


def _windows(tokens: Sequence[str], width: int):
    if len(tokens) <= width:
        yield tokens
        return
    for i in range(len(tokens) - width + 1):
        yield tokens[i : i + width]


def _count_occurrences(
    reference: Sequence[CleanDoc], words: list[str], width: int
) -> tuple[np.ndarray, np.ndarray, int]:
    """Window counts: per-word and pairwise boolean co-occurrence."""
    index = {w: i for i, w in enumerate(words)}
    n = len(words)
    occ = np.zeros(n)
    joint = np.zeros((n, n))
    n_windows = 0
    for doc in reference:
        for window in _windows(doc.tokens, width):
            n_windows += 1
            present = sorted({index[t] for t in window if t in index})
            for a_pos, i in enumerate(present):
                occ[i] += 1
                for j in present[a_pos:]:
                    joint[i, j] += 1
                    if i != j:
                        joint[j, i] += 1
    return occ, joint, n_windows


def _npmi_matrix(occ: np.ndarray, joint: np.ndarray, n_windows: int) -> np.ndarray:
    p_w = occ / n_windows
    p_joint = joint / n_windows
    num = np.log((p_joint + LOG_EPS) / np.outer(p_w, p_w))
    den = -np.log(p_joint + LOG_EPS)
    return num / den


def cv_for_word_sets(
    topic_words: Sequence[Sequence[str]],
    reference: Sequence[CleanDoc],
    window: int = WINDOW_WIDTH,
) -> float:
    """C_V over explicit per-topic word lists (the model-free core)."""
    if not reference:
        raise InsufficientReference("empty reference corpus")
    all_words = sorted({w for ws in topic_words for w in ws})
    occ, joint, n_windows = _count_occurrences(reference, all_words, window)
    missing = [all_words[i] for i in np.flatnonzero(occ == 0)]
    if missing:
        raise InsufficientReference(f"words never occur in reference: {missing}")

    global_index = {w: i for i, w in enumerate(all_words)}
    npmi = _npmi_matrix(occ, joint, n_windows)

    topic_scores = []
    for ws in topic_words:
        idx = [global_index[w] for w in ws]
        vectors = npmi[np.ix_(idx, idx)]   # row i = context vector of word i
        summed = vectors.sum(axis=0)       # the one-set W* vector
        sims = []
        for i in range(len(idx)):
            u = vectors[i]
            nu, nv = np.linalg.norm(u), np.linalg.norm(summed)
            sims.append(float(u @ summed / (nu * nv)) if nu > 0 and nv > 0 else 0.0)
        topic_scores.append(float(np.mean(sims)))
    return float(np.mean(topic_scores))


def coherence_cv(
    model: TopicModel,
    top_n: int,
    reference: Sequence[CleanDoc],
    window: int = WINDOW_WIDTH,
) -> float:
    """C_V of the model's top_n words per topic against `reference`."""
    if top_n < 2:
        raise ValueError("top_n must be >= 2")
    words_per_topic = [[w for w, _ in ws] for ws in top_words(model, top_n)]
    return cv_for_word_sets(words_per_topic, reference, window)
