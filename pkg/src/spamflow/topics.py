"""Topic modeling by collapsed Gibbs sampling, plus community topic profiles.

The sampler conditional for token i in document d with word w is

    p(z_i = k | rest) ∝ (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta)

computed from the count matrices with token i removed. The inner loop is
compiled with numba; it draws from numba's numpy-compatible MT19937 stream,
seeded once per fit, so runs are reproducible bit for bit (and a pure-Python
reference sampler can replay the identical stream in tests).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from .errors import ConfigError, DataError
from .ingest import Document
from .validation import check_non_negative_int, check_positive_int, check_seed

logger = logging.getLogger(__name__)

__all__ = [
    "GibbsLDA",
    "DocTopicLabel",
    "CommunityTopics",
    "label_documents",
    "community_topics",
    "save_model",
    "load_model",
    "write_doc_labels",
    "read_doc_labels",
    "write_community_topics",
    "read_community_topics",
]

UNASSIGNED_COMMUNITY = -1


@njit(cache=True)
def _gibbs_kernel(token_doc, token_word, z, n_dk, n_kv, n_k, alpha, beta, sweeps, seed):
    np.random.seed(seed)
    K = n_dk.shape[1]
    V = n_kv.shape[1]
    vbeta = V * beta
    n_tokens = token_doc.shape[0]
    cum = np.empty(K)
    for i in range(n_tokens):
        k = int(np.random.random() * K)
        if k == K:
            k = K - 1
        z[i] = k
        n_dk[token_doc[i], k] += 1
        n_kv[k, token_word[i]] += 1
        n_k[k] += 1
    for _ in range(sweeps):
        for i in range(n_tokens):
            d = token_doc[i]
            w = token_word[i]
            k = z[i]
            n_dk[d, k] -= 1
            n_kv[k, w] -= 1
            n_k[k] -= 1
            total = 0.0
            for kk in range(K):
                total += (n_dk[d, kk] + alpha) * (n_kv[kk, w] + beta) / (n_k[kk] + vbeta)
                cum[kk] = total
            u = np.random.random() * total
            k = 0
            while cum[k] < u:
                k += 1
            z[i] = k
            n_dk[d, k] += 1
            n_kv[k, w] += 1
            n_k[k] += 1


class GibbsLDA(BaseEstimator):
    """Latent Dirichlet Allocation fit by collapsed Gibbs sampling.

    Parameters follow the usual conventions: ``alpha=None`` resolves to
    50 / n_topics at fit time; counts are taken from the final sweep.
    """

    def __init__(self, n_topics=20, iterations=200, alpha=None, beta=0.01, seed=0):
        self.n_topics = n_topics
        self.iterations = iterations
        self.alpha = alpha
        self.beta = beta
        self.seed = seed

    def fit(self, corpus: Sequence[Document]) -> "GibbsLDA":
        n_topics = check_positive_int(self.n_topics, "n_topics")
        iterations = check_non_negative_int(self.iterations, "iterations")
        seed = check_seed(self.seed)
        if self.alpha is None:
            alpha = 50.0 / n_topics
        else:
            alpha = float(self.alpha)
        if alpha <= 0 or not float(self.beta) > 0:
            raise ConfigError("alpha and beta must be positive")
        beta = float(self.beta)
        corpus = list(corpus)
        if not corpus:
            raise DataError("fit: corpus is empty")
        empty = [doc.doc_id for doc in corpus if len(doc.tokens) == 0]
        if empty:
            raise DataError(
                f"fit: {len(empty)} documents have no tokens (first: {empty[0]!r})"
            )
        vocabulary: dict[str, int] = {}
        for doc in corpus:
            for token in doc.tokens:
                if token not in vocabulary:
                    vocabulary[token] = len(vocabulary)
        n_tokens = sum(len(doc.tokens) for doc in corpus)
        token_doc = np.empty(n_tokens, dtype=np.int32)
        token_word = np.empty(n_tokens, dtype=np.int32)
        cursor = 0
        for d, doc in enumerate(corpus):
            for token in doc.tokens:
                token_doc[cursor] = d
                token_word[cursor] = vocabulary[token]
                cursor += 1
        z = np.zeros(n_tokens, dtype=np.int32)
        n_dk = np.zeros((len(corpus), n_topics), dtype=np.int32)
        n_kv = np.zeros((n_topics, len(vocabulary)), dtype=np.int32)
        n_k = np.zeros(n_topics, dtype=np.int32)
        _gibbs_kernel(
            token_doc, token_word, z, n_dk, n_kv, n_k, alpha, beta, iterations, seed
        )
        self.alpha_ = alpha
        self.beta_ = beta
        self.vocabulary_ = tuple(vocabulary)
        self.doc_ids_ = tuple(doc.doc_id for doc in corpus)
        self.doc_topic_counts_ = n_dk
        self.topic_word_counts_ = n_kv
        self.topic_totals_ = n_k
        self.token_assignments_ = z
        self.n_tokens_ = n_tokens
        logger.debug(
            "GibbsLDA: fit %d docs, %d tokens, vocabulary %d, K=%d",
            len(corpus),
            n_tokens,
            len(vocabulary),
            n_topics,
        )
        return self


@dataclass(frozen=True)
class DocTopicLabel:
    doc_id: str
    topic: int


@dataclass(frozen=True)
class CommunityTopics:
    """Topic profile of one community's documents."""

    community_id: int
    topic_counts: Mapping[int, int]
    unique_topics: frozenset

    @staticmethod
    def from_counts(community_id: int, counts: Mapping[int, int]) -> "CommunityTopics":
        return CommunityTopics(
            community_id=community_id,
            topic_counts=dict(sorted(counts.items())),
            unique_topics=frozenset(counts),
        )


def label_documents(model: GibbsLDA) -> list[DocTopicLabel]:
    """Dominant topic per document (argmax of smoothed counts, lowest wins ties)."""
    if not hasattr(model, "doc_topic_counts_"):
        raise DataError("label_documents: model is not fitted")
    topics = np.argmax(model.doc_topic_counts_, axis=1)
    return [
        DocTopicLabel(doc_id, int(topic))
        for doc_id, topic in zip(model.doc_ids_, topics)
    ]


def community_topics(
    labels: Iterable[DocTopicLabel],
    doc_users: Mapping[str, str],
    membership: Mapping[str, int],
) -> tuple[list[CommunityTopics], CommunityTopics]:
    """Aggregate document topic labels into per-community profiles.

    Documents whose owner has no community land in a reported bucket with
    community id -1 instead of being silently dropped.
    """
    counts: dict[int, dict[int, int]] = {}
    unassigned: dict[int, int] = {}
    for label in labels:
        user = doc_users.get(label.doc_id)
        if user is None:
            raise DataError(f"community_topics: no user known for doc {label.doc_id!r}")
        community = membership.get(user)
        bucket = unassigned if community is None else counts.setdefault(community, {})
        bucket[label.topic] = bucket.get(label.topic, 0) + 1
    profiles = [
        CommunityTopics.from_counts(community, counts[community])
        for community in sorted(counts)
    ]
    return profiles, CommunityTopics.from_counts(UNASSIGNED_COMMUNITY, unassigned)


def save_model(model: GibbsLDA, path) -> None:
    """Textual dump: header + sparse doc-topic and topic-word count triples."""
    n_dk = model.doc_topic_counts_
    n_kv = model.topic_word_counts_
    with open(path, "w", encoding="utf-8") as handle:
        header = {
            "K": int(n_kv.shape[0]),
            "V": int(n_kv.shape[1]),
            "alpha": model.alpha_,
            "beta": model.beta_,
            "seed": model.seed,
            "iterations": model.iterations,
            "vocabulary": list(model.vocabulary_),
            "doc_ids": list(model.doc_ids_),
        }
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        ds, ks = np.nonzero(n_dk)
        for d, k in zip(ds.tolist(), ks.tolist()):
            handle.write(f"d,{d},{k},{int(n_dk[d, k])}\n")
        ks, vs = np.nonzero(n_kv)
        for k, v in zip(ks.tolist(), vs.tolist()):
            handle.write(f"k,{k},{v},{int(n_kv[k, v])}\n")


def load_model(path) -> GibbsLDA:
    with open(path, encoding="utf-8") as handle:
        header = json.loads(handle.readline())
        model = GibbsLDA(
            n_topics=header["K"],
            iterations=header["iterations"],
            alpha=header["alpha"],
            beta=header["beta"],
            seed=header["seed"],
        )
        K, V = header["K"], header["V"]
        doc_ids = header["doc_ids"]
        n_dk = np.zeros((len(doc_ids), K), dtype=np.int32)
        n_kv = np.zeros((K, V), dtype=np.int32)
        for line in handle:
            kind, a, b, count = line.rstrip("\n").split(",")
            if kind == "d":
                n_dk[int(a), int(b)] = int(count)
            elif kind == "k":
                n_kv[int(a), int(b)] = int(count)
            else:
                raise DataError(f"load_model: unknown record kind {kind!r}")
    model.alpha_ = header["alpha"]
    model.beta_ = header["beta"]
    model.vocabulary_ = tuple(header["vocabulary"])
    model.doc_ids_ = tuple(doc_ids)
    model.doc_topic_counts_ = n_dk
    model.topic_word_counts_ = n_kv
    model.topic_totals_ = n_kv.sum(axis=1, dtype=np.int32)
    model.n_tokens_ = int(n_kv.sum())
    return model


def write_doc_labels(labels: Iterable[DocTopicLabel], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("doc_id,topic\n")
        for label in labels:
            handle.write(f"{label.doc_id},{label.topic}\n")


def read_doc_labels(path) -> list[DocTopicLabel]:
    labels = []
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != "doc_id,topic":
            raise DataError(f"{path}: expected header doc_id,topic")
        for line in handle:
            doc_id, topic = line.rstrip("\n").rsplit(",", 1)
            labels.append(DocTopicLabel(doc_id, int(topic)))
    return labels


def write_community_topics(
    profiles: Iterable[CommunityTopics], unassigned: CommunityTopics, path
) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("community_id,topic,count\n")
        for profile in list(profiles) + [unassigned]:
            for topic in sorted(profile.topic_counts):
                handle.write(f"{profile.community_id},{topic},{profile.topic_counts[topic]}\n")


def read_community_topics(path) -> tuple[list[CommunityTopics], CommunityTopics]:
    counts: dict[int, dict[int, int]] = {}
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != "community_id,topic,count":
            raise DataError(f"{path}: expected header community_id,topic,count")
        for line in handle:
            community, topic, count = line.rstrip("\n").split(",")
            counts.setdefault(int(community), {})[int(topic)] = int(count)
    unassigned = CommunityTopics.from_counts(
        UNASSIGNED_COMMUNITY, counts.pop(UNASSIGNED_COMMUNITY, {})
    )
    profiles = [
        CommunityTopics.from_counts(community, counts[community])
        for community in sorted(counts)
    ]
    return profiles, unassigned
