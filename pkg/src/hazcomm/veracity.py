"""Content veracity: classify posts Real/Fake and strip Fake nodes.

Two classifier routes share one verdict shape: an in-core logistic model
over tf-idf features (trained here, deterministic under a seed), and a
remote HTTP classifier behind a small wire contract for externally
hosted neural models. Filtering removes Fake nodes plus their incident
edges and recomputes components.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import Veracity
from .socialgraph import SocialGraph, remove_nodes
from .textprep import CleanDoc, EmptyCorpus, Vocabulary, build_matrix, vectorize

__all__ = [
    "VeracityVerdict",
    "LinearFakeNewsModel",
    "RemoteFallback",
    "RemoteClassifierSpec",
    "RemoteClassifier",
    "SingleClassCorpus",
    "VocabularyMismatch",
    "train_linear",
    "classify",
    "filter_graph",
    "load_labeled_tsv",
]

DECISION_THRESHOLD = 0.5


class SingleClassCorpus(ValueError):
    pass


class VocabularyMismatch(ValueError):
    pass


@dataclass(frozen=True)
class VeracityVerdict:
    doc_id: str
    label: Veracity  # REAL or FAKE
    score: float     # probability of Fake

    def __post_init__(self):
        expected = Veracity.FAKE if self.score > DECISION_THRESHOLD else Veracity.REAL
        if self.label is not expected:
            raise ValueError("label inconsistent with score and threshold")


@dataclass(frozen=True)
class LinearFakeNewsModel:
    weights: np.ndarray
    bias: float
    vocab: Vocabulary
    trained_on: str  # dataset fingerprint

    def __post_init__(self):
        if len(self.weights) != len(self.vocab):
            raise VocabularyMismatch(
                f"{len(self.weights)} weights for {len(self.vocab)} terms"
            )

    def score(self, doc: CleanDoc) -> float:
        x = vectorize(doc, self.vocab)
        return _sigmoid(float(np.dot(self.weights, x)) + self.bias)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _stratified_split(
    labels: Sequence[int], train_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Index split preserving the class ratio in both halves."""
    labels_arr = np.asarray(labels)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in np.unique(labels_arr):
        members = np.flatnonzero(labels_arr == cls)
        members = members[rng.permutation(len(members))]
        cut = int(round(train_fraction * len(members)))
        train_idx.extend(members[:cut])
        test_idx.extend(members[cut:])
    return np.array(sorted(train_idx)), np.array(sorted(test_idx))


@dataclass(frozen=True)
class TrainReport:
    model: LinearFakeNewsModel
    test_accuracy: float
    test_size: int
    train_size: int


def train_linear(
    docs: Sequence[CleanDoc],
    labels: Sequence[int],
    split: float = 0.7,
    seed: int = 0,
    max_features: int = 5000,
    epochs: int = 20,
    lr: float = 0.5,
    l2: float = 1e-4,
) -> TrainReport:
    """Fit the logistic model by SGD on L2-normalized tf-idf rows.

    labels: 1 = fake, 0 = real. The split is stratified and the whole
    procedure is deterministic for a fixed seed.
    """
    if not docs:
        raise EmptyCorpus("no training documents")
    if len(docs) != len(labels):
        raise ValueError("docs and labels length mismatch")
    if not (0.0 < split < 1.0):
        raise ValueError("split must be in (0, 1)")
    if len(set(labels)) < 2:
        raise SingleClassCorpus("need both classes present")

    rng = np.random.default_rng(seed)
    train_idx, test_idx = _stratified_split(labels, split, rng)
    if len(set(int(labels[i]) for i in train_idx)) < 2 or len(test_idx) == 0:
        raise SingleClassCorpus("split left a side without both classes")

    train_docs = [docs[i] for i in train_idx]
    vocab, dtm = build_matrix(train_docs, max_features=max_features)
    x_train = dtm.weights
    y_train = np.array([labels[i] for i in train_idx], dtype=float)

    w = np.zeros(len(vocab))
    b = 0.0
    n = x_train.shape[0]
    for epoch in range(epochs):
        step = lr / (1.0 + epoch)
        order = rng.permutation(n)
        for i in order:
            row = x_train.getrow(i)
            z = float((row @ w)[0]) + b
            g = _sigmoid(z) - y_train[i]
            w[row.indices] -= step * g * row.data
            w -= step * l2 * w
            b -= step * g

    fingerprint = hashlib.sha256(
        ("\n".join(" ".join(d.tokens) for d in docs) + repr(sorted(set(labels)))).encode()
    ).hexdigest()[:16]
    model = LinearFakeNewsModel(weights=w, bias=b, vocab=vocab, trained_on=fingerprint)

    correct = 0
    for i in test_idx:
        s = model.score(docs[i])
        pred = 1 if s > DECISION_THRESHOLD else 0
        correct += int(pred == labels[i])
    acc = correct / len(test_idx)
    return TrainReport(model=model, test_accuracy=acc,
                       test_size=len(test_idx), train_size=len(train_idx))


def classify(doc: CleanDoc, model: LinearFakeNewsModel) -> VeracityVerdict:
    """score = sigmoid(w.x + b); Fake only strictly above the threshold
    (the boundary stays Real: prefer under-blocking)."""
    s = model.score(doc)
    label = Veracity.FAKE if s > DECISION_THRESHOLD else Veracity.REAL
    return VeracityVerdict(doc_id=doc.doc_id, label=label, score=s)


def filter_graph(
    graphs: Iterable[SocialGraph],
    classifier: Callable[[CleanDoc], VeracityVerdict],
    on_verdict: Callable[[VeracityVerdict], None] | None = None,
) -> list[SocialGraph]:
    """Remove every Fake-labeled node (and incident edges) from each
    graph. on_verdict fires for every node so callers can persist the new
    veracity field on the stored record."""
    cleaned = []
    for g in graphs:
        doomed = set()
        for node_id in g.node_ids:
            verdict = classifier(g.nodes[node_id].content)
            if on_verdict is not None:
                on_verdict(verdict)
            if verdict.label is Veracity.FAKE:
                doomed.add(node_id)
        cleaned.append(remove_nodes(g, doomed) if doomed else g)
    return cleaned


class RemoteFallback(Enum):
    PASS_THROUGH = "pass_through"    # treat as Real, keep the record
    MARK_UNCHECKED = "mark_unchecked"  # leave the record unclassified


@dataclass(frozen=True)
class RemoteClassifierSpec:
    endpoint: str
    timeout_ms: int = 2000
    fallback: RemoteFallback = RemoteFallback.PASS_THROUGH

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


class RemoteClassifier:
    """HTTP client for an externally hosted veracity model.

    Wire contract: POST JSON {"id": ..., "text": ...} and read back
    {"score": <float 0..1>}. Timeouts and bad responses never propagate:
    the configured fallback applies and the incident is counted.
    """

    def __init__(self, spec: RemoteClassifierSpec, transport=None):
        import httpx

        self.spec = spec
        self.timeouts = 0
        self.bad_responses = 0
        self._client = httpx.Client(
            timeout=spec.timeout_ms / 1000.0, transport=transport
        )

    def classify(self, doc_id: str, text: str) -> VeracityVerdict | None:
        """Verdict for raw text, or None when the fallback is
        MARK_UNCHECKED and the endpoint failed."""
        import httpx

        try:
            resp = self._client.post(
                self.spec.endpoint,
                content=json.dumps({"id": doc_id, "text": text}),
                headers={"content-type": "application/json"},
            )
            if resp.status_code != 200:
                raise ValueError(f"status {resp.status_code}")
            score = float(resp.json()["score"])
            if not (0.0 <= score <= 1.0) or math.isnan(score):
                raise ValueError(f"score out of range: {score}")
        except httpx.TimeoutException:
            self.timeouts += 1
            return self._fallback(doc_id)
        except Exception:
            self.bad_responses += 1
            return self._fallback(doc_id)
        label = Veracity.FAKE if score > DECISION_THRESHOLD else Veracity.REAL
        return VeracityVerdict(doc_id=doc_id, label=label, score=score)

    def _fallback(self, doc_id: str) -> VeracityVerdict | None:
        if self.spec.fallback is RemoteFallback.PASS_THROUGH:
            return VeracityVerdict(doc_id=doc_id, label=Veracity.REAL, score=0.0)
        return None

    def close(self) -> None:
        self._client.close()


def load_labeled_tsv(path: str) -> tuple[list[str], list[int]]:
    """Read `label<TAB>text` lines with label in {fake, real}."""
    texts: list[str] = []
    labels: list[int] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            label, _, text = line.partition("\t")
            label = label.strip().lower()
            if label not in ("fake", "real"):
                raise ValueError(f"line {lineno}: label must be fake/real, got {label!r}")
            texts.append(text)
            labels.append(1 if label == "fake" else 0)
    return texts, labels
