"""Tweet text cleaning and the normalized TF-IDF document-term matrix.

Cleaning order: mentions, links, punctuation, whitespace, digits are
stripped, text is lowercased and tokenized, stop words and short tokens
drop out, and the rest is Porter-stemmed. Weights are raw term frequency
times smoothed idf (1 + ln((1+N)/(1+df))), rows L2-normalized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.sparse as sp

from . import stemming

__all__ = [
    "CleanDoc",
    "Vocabulary",
    "DocTermMatrix",
    "EmptyCorpus",
    "load_stopwords",
    "preprocess",
    "build_matrix",
    "vectorize",
    "cosine",
]


class EmptyCorpus(ValueError):
    """No documents (or no tokens at all) to build from."""


_MENTION_RE = re.compile(r"@\w+")
_LINK_RE = re.compile(r"https?://\S+")
_PUNCT_RE = re.compile(r"[^\w\s]|_")
_DIGIT_RE = re.compile(r"\d+")
_WS_RE = re.compile(r"\s+")


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """Read the stop-word list (one word per line); ships pinned."""
    if path is None:
        text = resources.files("hazcomm.data").joinpath("stopwords_en.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


_DEFAULT_STOPWORDS = load_stopwords()


@dataclass(frozen=True)
class CleanDoc:
    """Preprocessed content of one record: ordered stemmed tokens."""

    doc_id: str
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


def preprocess(text: str, stopwords: frozenset[str] = _DEFAULT_STOPWORDS) -> tuple[str, ...]:
    """Clean raw text into stemmed tokens. Empty output is fine.

    Tokens shorter than 3 characters are dropped both before stemming
    (per the cleaning steps) and after (a handful of stems shrink below
    3 chars, which would break the token-length invariant).
    """
    text = _MENTION_RE.sub(" ", text)
    text = _LINK_RE.sub(" ", text)
    text = _PUNCT_RE.sub(" ", text)
    text = _DIGIT_RE.sub(" ", text)
    text = _WS_RE.sub(" ", text).strip().lower()
    out = []
    for tok in text.split():
        if len(tok) < 3 or tok in stopwords:
            continue
        stemmed = stemming.stem(tok)
        if len(stemmed) >= 3:
            out.append(stemmed)
    return tuple(out)


@dataclass(frozen=True)
class Vocabulary:
    """Dense term indexing plus per-term document frequency."""

    index: dict[str, int]
    df: np.ndarray  # document frequency per index
    n_docs: int     # corpus size the idf was frozen against

    def __len__(self) -> int:
        return len(self.index)

    def idf(self) -> np.ndarray:
        return 1.0 + np.log((1.0 + self.n_docs) / (1.0 + self.df))


@dataclass(frozen=True)
class DocTermMatrix:
    doc_ids: tuple[str, ...]
    weights: sp.csr_matrix  # rows L2-normalized (zero rows allowed)

    def row(self, i: int) -> np.ndarray:
        return np.asarray(self.weights.getrow(i).todense()).ravel()


def _row_normalize(mat: sp.csr_matrix) -> sp.csr_matrix:
    norms = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.diags(scale) @ mat


def build_matrix(
    docs: list[CleanDoc], max_features: int | None = None
) -> tuple[Vocabulary, DocTermMatrix]:
    """Build vocabulary and the L2-normalized tf-idf matrix in one pass.

    Terms are indexed in sorted order for determinism. With
    max_features, the most frequent terms by total corpus count are kept
    (ties broken alphabetically), mirroring the usual vectorizer rule.
    """
    if not docs:
        raise EmptyCorpus("no documents")

    counts: dict[str, int] = {}
    dfs: dict[str, int] = {}
    for doc in docs:
        seen = set()
        for tok in doc.tokens:
            counts[tok] = counts.get(tok, 0) + 1
            if tok not in seen:
                dfs[tok] = dfs.get(tok, 0) + 1
                seen.add(tok)

    terms = sorted(counts)
    if max_features is not None and len(terms) > max_features:
        terms = sorted(sorted(counts), key=lambda t: -counts[t])[:max_features]
        terms = sorted(terms)
    index = {t: i for i, t in enumerate(terms)}
    df = np.array([dfs[t] for t in terms], dtype=float)
    vocab = Vocabulary(index=index, df=df, n_docs=len(docs))

    idf = vocab.idf()
    rows, cols, vals = [], [], []
    for r, doc in enumerate(docs):
        tf: dict[int, int] = {}
        for tok in doc.tokens:
            j = index.get(tok)
            if j is not None:
                tf[j] = tf.get(j, 0) + 1
        for j, c in sorted(tf.items()):
            rows.append(r)
            cols.append(j)
            vals.append(c * idf[j])
    mat = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(docs), len(terms)), dtype=float
    )
    mat = _row_normalize(mat)
    return vocab, DocTermMatrix(doc_ids=tuple(d.doc_id for d in docs), weights=mat)


def vectorize(doc: CleanDoc, vocab: Vocabulary) -> np.ndarray:
    """Project one document with frozen idf; OOV terms are ignored."""
    vec = np.zeros(len(vocab))
    idf = vocab.idf()
    for tok in doc.tokens:
        j = vocab.index.get(tok)
        if j is not None:
            vec[j] += idf[j]
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def dump_triplets(matrix: DocTermMatrix, vocab: Vocabulary, path: str) -> None:
    """Debug dump: one `doc_id<TAB>term<TAB>weight` line per nonzero."""
    terms = [None] * len(vocab)
    for t, i in vocab.index.items():
        terms[i] = t
    coo = matrix.weights.tocoo()
    with open(path, "w", encoding="utf-8") as f:
        for r, c, v in sorted(zip(coo.row, coo.col, coo.data), key=lambda x: (x[0], x[1])):
            f.write(f"{matrix.doc_ids[r]}\t{terms[c]}\t{v:.12g}\n")
