"""Online topic modeling over the cleaned stream, plus topic graphs.

The model is latent Dirichlet allocation fitted by online variational
Bayes: each batch runs a per-document E-step to convergence and then a
natural-gradient M-step with learning rate (tau0 + t)^(-kappa). Priors
start symmetric and can be re-estimated from data ("auto") with the
standard Newton update for Dirichlet parameters.

Membership of a document in a topic is its posterior proportion passing
the threshold; a cosine rule against topic rows ships as an alternative.
Topic graphs restrict the clean social graphs to one topic's members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.special import gammaln, polygamma, psi

from .socialgraph import SocialGraph
from .textprep import CleanDoc, EmptyCorpus, Vocabulary, cosine, vectorize

__all__ = [
    "TopicModel",
    "TopicMembership",
    "TopicGraph",
    "VocabularyMismatch",
    "fit_online",
    "fit_batch",
    "infer",
    "topic_graphs",
    "perplexity",
    "top_words",
    "write_topic_report",
]

DEFAULT_EPS_C = 0.5     # membership threshold on the posterior proportion
MEAN_CHANGE_THRESH = 1e-4
MAX_E_ITER = 100


class VocabularyMismatch(ValueError):
    pass


def _dirichlet_expectation(arr: np.ndarray) -> np.ndarray:
    """E[log theta] for theta ~ Dir(arr), rows independent for 2-D."""
    if arr.ndim == 1:
        return psi(arr) - psi(np.sum(arr))
    return psi(arr) - psi(np.sum(arr, axis=1))[:, np.newaxis]


def _update_dir_prior(
    prior: np.ndarray, n: int, logphat: np.ndarray, rho: float
) -> np.ndarray:
    """One blended Newton step for a Dirichlet prior given mean
    sufficient statistics (Minka's fixed-point; gensim-style rho blend)."""
    gradf = n * (psi(np.sum(prior)) - psi(prior) + logphat)
    c = n * polygamma(1, np.sum(prior))
    q = -n * polygamma(1, prior)
    b = np.sum(gradf / q) / (1.0 / c + np.sum(1.0 / q))
    dprior = -(gradf - b) / q
    updated = prior + rho * dprior
    if np.all(updated > 0):
        return updated
    return prior


@dataclass
class TopicModel:
    """Immutable snapshot of the online LDA state.

    lambda_ holds the variational Dirichlet over each topic's words; the
    exposed topic_word view is its row normalization (row-stochastic).
    """

    k: int
    vocab: Vocabulary
    alpha: np.ndarray           # (k,) document-topic prior
    eta: float                  # topic-word prior
    lambda_: np.ndarray         # (k, V) variational parameter
    update_count: int = 0
    docs_seen: int = 0
    tau0: float = 1024.0
    kappa: float = 0.7
    auto_alpha: bool = False
    auto_eta: bool = False

    @classmethod
    def create(
        cls,
        k: int,
        vocab: Vocabulary,
        alpha: float | Literal["auto"] = "auto",
        eta: float | Literal["auto"] = "auto",
        seed: int = 0,
        tau0: float = 1024.0,
        kappa: float = 0.7,
    ) -> "TopicModel":
        if k < 1:
            raise ValueError("k must be >= 1")
        rng = np.random.default_rng(seed)
        lam = rng.gamma(100.0, 1.0 / 100.0, (k, len(vocab)))
        auto_alpha = alpha == "auto"
        auto_eta = eta == "auto"
        alpha_vec = np.full(k, 1.0 / k if auto_alpha else float(alpha))
        eta_val = 1.0 / k if auto_eta else float(eta)
        if np.any(alpha_vec <= 0) or eta_val <= 0:
            raise ValueError("priors must be positive")
        return cls(
            k=k, vocab=vocab, alpha=alpha_vec, eta=eta_val, lambda_=lam,
            tau0=tau0, kappa=kappa, auto_alpha=auto_alpha, auto_eta=auto_eta,
        )

    @property
    def topic_word(self) -> np.ndarray:
        return self.lambda_ / self.lambda_.sum(axis=1)[:, np.newaxis]

    def doc_to_ids(self, doc: CleanDoc) -> tuple[np.ndarray, np.ndarray]:
        counts: dict[int, int] = {}
        for tok in doc.tokens:
            j = self.vocab.index.get(tok)
            if j is not None:
                counts[j] = counts.get(j, 0) + 1
        ids = np.array(sorted(counts), dtype=int)
        cts = np.array([counts[j] for j in sorted(counts)], dtype=float)
        return ids, cts

    # -- serialization -------------------------------------------------

    def to_json(self) -> str:
        terms = [None] * len(self.vocab)
        for t, i in self.vocab.index.items():
            terms[i] = t
        return json.dumps(
            {
                "version": 1,
                "k": self.k,
                "alpha": self.alpha.tolist(),
                "eta": self.eta,
                "lambda": self.lambda_.tolist(),
                "update_count": self.update_count,
                "docs_seen": self.docs_seen,
                "tau0": self.tau0,
                "kappa": self.kappa,
                "auto_alpha": self.auto_alpha,
                "auto_eta": self.auto_eta,
                "terms": terms,
                "df": self.vocab.df.tolist(),
                "n_docs": self.vocab.n_docs,
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "TopicModel":
        obj = json.loads(payload)
        if obj.get("version") != 1:
            raise ValueError(f"unsupported snapshot version: {obj.get('version')}")
        vocab = Vocabulary(
            index={t: i for i, t in enumerate(obj["terms"])},
            df=np.array(obj["df"], dtype=float),
            n_docs=int(obj["n_docs"]),
        )
        return cls(
            k=int(obj["k"]),
            vocab=vocab,
            alpha=np.array(obj["alpha"], dtype=float),
            eta=float(obj["eta"]),
            lambda_=np.array(obj["lambda"], dtype=float),
            update_count=int(obj["update_count"]),
            docs_seen=int(obj["docs_seen"]),
            tau0=float(obj["tau0"]),
            kappa=float(obj["kappa"]),
            auto_alpha=bool(obj["auto_alpha"]),
            auto_eta=bool(obj["auto_eta"]),
        )


def _e_step_doc(
    ids: np.ndarray,
    cts: np.ndarray,
    alpha: np.ndarray,
    exp_elog_beta_d: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Converge gamma for one document; returns (gamma, phinorm-weights).

    Gamma starts at alpha + N/k (deterministic, no per-doc randomness) so
    repeated runs are bit-identical.
    """
    k = len(alpha)
    gamma = alpha + cts.sum() / k
    elog_theta = _dirichlet_expectation(gamma)
    exp_elog_theta = np.exp(elog_theta)
    phinorm = exp_elog_theta @ exp_elog_beta_d + 1e-100
    for _ in range(MAX_E_ITER):
        last = gamma
        gamma = alpha + exp_elog_theta * ((cts / phinorm) @ exp_elog_beta_d.T)
        elog_theta = _dirichlet_expectation(gamma)
        exp_elog_theta = np.exp(elog_theta)
        phinorm = exp_elog_theta @ exp_elog_beta_d + 1e-100
        if np.mean(np.abs(gamma - last)) < MEAN_CHANGE_THRESH:
            break
    return gamma, cts / phinorm


def fit_online(model: TopicModel, batch: Sequence[CleanDoc]) -> TopicModel:
    """One online update from a mini-batch; returns a new snapshot.

    Empty-token documents are skipped but the update counter still
    advances once per call.
    """
    if not batch:
        raise ValueError("batch must be non-empty")

    elog_beta = _dirichlet_expectation(model.lambda_)
    exp_elog_beta = np.exp(elog_beta)
    sstats = np.zeros_like(model.lambda_)
    gammas = []
    effective = 0
    for doc in batch:
        ids, cts = model.doc_to_ids(doc)
        if len(ids) == 0:
            continue
        effective += 1
        gamma, weights = _e_step_doc(ids, cts, model.alpha, exp_elog_beta[:, ids])
        gammas.append(gamma)
        exp_elog_theta = np.exp(_dirichlet_expectation(gamma))
        sstats[:, ids] += np.outer(exp_elog_theta, weights)
    sstats *= exp_elog_beta

    rho = (model.tau0 + model.update_count) ** (-model.kappa)
    docs_seen = model.docs_seen + effective
    d_est = max(docs_seen, effective)
    if effective > 0:
        lam = (1.0 - rho) * model.lambda_ + rho * (
            model.eta + d_est * sstats / effective
        )
    else:
        lam = model.lambda_.copy()

    alpha = model.alpha.copy()
    eta = model.eta
    if model.auto_alpha and gammas:
        logphat = np.mean([_dirichlet_expectation(g) for g in gammas], axis=0)
        alpha = _update_dir_prior(alpha, len(gammas), logphat, rho)
    if model.auto_eta and effective > 0:
        logphat_eta = np.mean(_dirichlet_expectation(lam), axis=0)
        eta_vec = _update_dir_prior(
            np.full(lam.shape[1], eta), model.k, logphat_eta, rho
        )
        eta = float(np.mean(eta_vec))

    return TopicModel(
        k=model.k, vocab=model.vocab, alpha=alpha, eta=eta, lambda_=lam,
        update_count=model.update_count + 1, docs_seen=docs_seen,
        tau0=model.tau0, kappa=model.kappa,
        auto_alpha=model.auto_alpha, auto_eta=model.auto_eta,
    )


def fit_batch(
    docs: Sequence[CleanDoc],
    k: int,
    vocab: Vocabulary,
    seeds: Sequence[int] = (0, 1, 2),
    passes: int = 3,
    batch_size: int = 256,
    alpha: float | Literal["auto"] = "auto",
    eta: float | Literal["auto"] = "auto",
    tau0: float = 1.0,
    kappa: float = 0.7,
) -> TopicModel:
    """From-scratch fit over a fixed corpus with seeded restarts.

    Online variational Bayes is sensitive to its random topic init, so a
    batch retrain runs a few deterministic restarts and keeps the model
    with the best (lowest) training perplexity. tau0=1 makes the first
    update take a full natural-gradient step, which suits a from-scratch
    fit; streaming updates should keep the larger default offset.
    """
    if not docs:
        raise EmptyCorpus("no documents to fit")
    eval_docs = docs[: min(len(docs), 500)]
    best: TopicModel | None = None
    best_perp = np.inf
    for seed in seeds:
        model = TopicModel.create(k, vocab, seed=seed, alpha=alpha, eta=eta,
                                  tau0=tau0, kappa=kappa)
        for _ in range(passes):
            for s in range(0, len(docs), batch_size):
                model = fit_online(model, docs[s : s + batch_size])
        perp = perplexity(model, eval_docs)
        if perp < best_perp:
            best, best_perp = model, perp
    return best


@dataclass(frozen=True)
class TopicMembership:
    doc_id: str
    theta: np.ndarray
    members: frozenset[int]


def infer(
    model: TopicModel,
    doc: CleanDoc,
    eps_c: float = DEFAULT_EPS_C,
    membership: Literal["posterior", "cosine"] = "posterior",
) -> TopicMembership:
    """Topic proportions for one document with frozen topics.

    Default membership: posterior proportion >= eps_c. The cosine
    alternative compares the document's tf-idf vector against each topic
    row instead.
    """
    ids, cts = model.doc_to_ids(doc)
    beta = model.topic_word
    if len(ids) == 0:
        # no in-vocabulary content: prior-mean proportions, no memberships
        theta = model.alpha / model.alpha.sum()
        return TopicMembership(doc_id=doc.doc_id, theta=theta, members=frozenset())
    gamma, _ = _e_step_doc(ids, cts, model.alpha, beta[:, ids])
    theta = gamma / gamma.sum()
    if membership == "posterior":
        members = frozenset(int(j) for j in np.flatnonzero(theta >= eps_c))
    else:
        vec = vectorize(doc, model.vocab)
        sims = np.array([cosine(vec, beta[j]) for j in range(model.k)])
        members = frozenset(int(j) for j in np.flatnonzero(sims >= eps_c))
    return TopicMembership(doc_id=doc.doc_id, theta=theta, members=members)


@dataclass(frozen=True)
class TopicGraph:
    topic: int
    graph: SocialGraph


def topic_graphs(
    graphs: Iterable[SocialGraph],
    model: TopicModel,
    eps_c: float = DEFAULT_EPS_C,
    membership: Literal["posterior", "cosine"] = "posterior",
) -> list[TopicGraph]:
    """One graph per topic over all input graphs' member nodes.

    A node appears in every topic it belongs to; an edge survives only
    with both endpoints members (dangling edges are never emitted).
    """
    graphs = list(graphs)
    member_ids: list[set[str]] = [set() for _ in range(model.k)]
    for g in graphs:
        for node_id in g.node_ids:
            ms = infer(model, g.nodes[node_id].content, eps_c, membership)
            for j in ms.members:
                member_ids[j].add(node_id)

    out = []
    for j in range(model.k):
        nodes = {}
        edges = set()
        for g in graphs:
            for nid in g.node_ids:
                if nid in member_ids[j]:
                    nodes[nid] = g.nodes[nid]
            for u, v in g.edges:
                if u in member_ids[j] and v in member_ids[j]:
                    edges.add((u, v))
        sub = SocialGraph(
            {i: nodes[i] for i in sorted(nodes)},
            frozenset(edges),
            _components_of(nodes, edges),
        )
        out.append(TopicGraph(topic=j, graph=sub))
    return out


def _components_of(nodes, edges):
    from .socialgraph import _partition

    return _partition(nodes, frozenset(edges))


def perplexity(model: TopicModel, docs: Sequence[CleanDoc]) -> float:
    """exp of negative mean per-token variational bound; lower is better.

    The word term uses log of the row-stochastic topic_word matrix (not
    the digamma expectation), so a uniform one-topic model scores exactly
    |V|; the document-theta prior/entropy terms are included exactly.
    """
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("no documents")
    beta = model.topic_word
    log_beta = np.log(np.maximum(beta, 1e-300))
    total_tokens = 0.0
    bound = 0.0
    alpha = model.alpha
    for doc in docs:
        ids, cts = model.doc_to_ids(doc)
        if len(ids) == 0:
            continue
        total_tokens += cts.sum()
        gamma, _ = _e_step_doc(ids, cts, alpha, beta[:, ids])
        elog_theta = _dirichlet_expectation(gamma)
        # E_q[log p(w | theta, beta)] via the optimal phi
        mat = elog_theta[:, np.newaxis] + log_beta[:, ids]
        tmax = mat.max(axis=0)
        bound += float(np.sum(cts * (np.log(np.exp(mat - tmax).sum(axis=0)) + tmax)))
        # E_q[log p(theta | alpha)] - E_q[log q(theta | gamma)]
        bound += float(np.sum((alpha - gamma) * elog_theta))
        bound += float(np.sum(gammaln(gamma) - gammaln(alpha)))
        bound += float(gammaln(alpha.sum()) - gammaln(gamma.sum()))
    if total_tokens == 0:
        raise EmptyCorpus("documents contain no in-vocabulary tokens")
    return float(np.exp(-bound / total_tokens))


def top_words(model: TopicModel, n: int = 10) -> list[list[tuple[str, float]]]:
    terms = [None] * len(model.vocab)
    for t, i in model.vocab.index.items():
        terms[i] = t
    beta = model.topic_word
    out = []
    for j in range(model.k):
        order = np.argsort(-beta[j], kind="stable")[:n]
        out.append([(terms[i], float(beta[j, i])) for i in order])
    return out


def write_topic_report(model: TopicModel, path: str, n: int = 10) -> None:
    """Per topic, top-n `word<TAB>probability` rows."""
    with open(path, "w", encoding="utf-8") as f:
        for j, words in enumerate(top_words(model, n)):
            f.write(f"# topic {j}\n")
            for word, prob in words:
                f.write(f"{word}\t{prob:.6f}\n")
