"""Seeded synthetic neighborhoods for end-to-end testing.

Each neighborhood is a planted-partition follower graph (reciprocal edges,
dense blocks), a topic-separated corpus (every community has a unique
primary topic and sometimes a shared secondary with disjoint vocabularies),
and planted message campaigns:

- benign campaigns spread via many distinct authors across the communities
  that share a secondary topic (a coherent party of interest, with
  author/message ratio near 1); their copies sit at the end of the authors'
  timelines, so the topic model sees them as documents on the shared topic;
- spam campaigns are pushed by a handful of authors into randomly chosen
  communities regardless of topic (ratio well below 1); their copies carry
  timestamps inside the background range, scattering them into documents
  dominated by regular posts.

Every copy of a campaign embeds a campaign-unique marker token at every
fourth position, so each window of four consecutive tokens contains it:
grouping recovers planted campaigns exactly and never merges two campaigns.
Output uses the same file formats the pipeline ingests, so synthetic and
real data are interchangeable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import write_labels
from .errors import ConfigError
from .graph import Partition, SocialGraph, write_edge_list
from .ingest import Message, Timeline
from .validation import check_fraction, check_positive_int, check_seed, derive_seed

logger = logging.getLogger(__name__)

__all__ = [
    "SynthConfig",
    "PlantedCampaign",
    "SynthNeighborhood",
    "generate_network",
    "generate_corpus",
    "generate_campaigns",
    "generate_neighborhood",
    "write_neighborhood",
    "generate_dataset",
]

_BACKGROUND_TS = 1_500_000_000
_CAMPAIGN_TS = 1_500_100_000

# Share of a user's background messages drawn from a secondary community
# topic; small enough that every background document's dominant topic stays
# the community's primary one.
SECONDARY_SHARE = 0.15


@dataclass
class SynthConfig:
    n_communities: int = 8
    community_size: int = 30
    p_in: float = 0.25
    p_out: float = 0.01
    n_topics: int = 12
    vocab_per_topic: int = 200
    docs_per_user: int = 2
    n_benign_groups: int = 40
    n_spam_groups: int = 40
    group_size_range: tuple = (10, 60)
    topics_per_community: tuple = (1, 2)
    messages_per_doc: int = 20
    words_per_message: int = 8
    seed: int = 0

    def __post_init__(self):
        for name in (
            "n_communities",
            "community_size",
            "n_topics",
            "vocab_per_topic",
            "docs_per_user",
            "n_benign_groups",
            "n_spam_groups",
            "messages_per_doc",
        ):
            check_positive_int(getattr(self, name), name)
        check_fraction(self.p_in, "p_in")
        check_fraction(self.p_out, "p_out")
        if not self.p_out < self.p_in:
            raise ConfigError("need p_out < p_in")
        lo, hi = self.group_size_range
        if not (2 <= lo <= hi):
            raise ConfigError("group_size_range must satisfy 2 <= lo <= hi")
        lo_t, hi_t = self.topics_per_community
        if not (1 <= lo_t <= hi_t <= self.n_topics):
            raise ConfigError("topics_per_community must fit within n_topics")
        if self.words_per_message < 4:
            raise ConfigError("words_per_message must be at least 4")
        check_seed(self.seed)


@dataclass(frozen=True)
class PlantedCampaign:
    group_id: str
    label: str
    message_ids: tuple
    authors: tuple
    communities: tuple
    topic: int


@dataclass
class SynthNeighborhood:
    neighborhood_id: str
    edges: list
    partition: Partition
    timelines: list
    labels: dict
    planted_topics: dict
    campaigns: list = field(default_factory=list)


def _community_users(cfg: SynthConfig, neighborhood_id: str) -> list[list[str]]:
    return [
        [
            f"{neighborhood_id}u{c * cfg.community_size + i:05d}"
            for i in range(cfg.community_size)
        ]
        for c in range(cfg.n_communities)
    ]


def _sample_pairs(rng, n_slots: int, probability: float) -> np.ndarray:
    """Indices of Bernoulli successes among n_slots without drawing each one."""
    draws = rng.binomial(n_slots, probability)
    if draws == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(n_slots, size=draws, replace=False))


def generate_network(cfg: SynthConfig, neighborhood_id: str = "n000") -> tuple[SocialGraph, Partition]:
    """Planted-partition graph; every edge is emitted in both directions."""
    rng = np.random.default_rng(derive_seed(cfg.seed, neighborhood_id, "network"))
    blocks = _community_users(cfg, neighborhood_id)
    size = cfg.community_size
    pairs: list[tuple[str, str]] = []
    upper_i, upper_j = np.triu_indices(size, k=1)
    for block in blocks:
        for slot in _sample_pairs(rng, len(upper_i), cfg.p_in):
            pairs.append((block[upper_i[slot]], block[upper_j[slot]]))
    for a in range(cfg.n_communities):
        for b in range(a + 1, cfg.n_communities):
            for slot in _sample_pairs(rng, size * size, cfg.p_out):
                pairs.append((blocks[a][slot // size], blocks[b][slot % size]))
    edges = []
    for u, v in pairs:
        edges.append((u, v))
        edges.append((v, u))
    graph = SocialGraph(directed=True, edges=edges, vertices=[u for b in blocks for u in b])
    return graph, Partition(blocks)


def _topic_vocabulary(cfg: SynthConfig) -> list[np.ndarray]:
    return [
        np.array([f"t{t:02d}w{j:04d}" for j in range(cfg.vocab_per_topic)])
        for t in range(cfg.n_topics)
    ]


def _assign_topics(cfg: SynthConfig, n_communities: int) -> dict:
    """Planted topics per community index.

    Community i's primary topic is i mod n_topics, so primaries are unique
    whenever topics suffice. Extra topic slots (community sizes alternate
    through the configured range) draw round-robin from a small pool of the
    remaining topics; the pool is kept short so every used pool topic is
    shared by at least two communities. Those shared topics are the parties
    of interest that benign campaigns ride on.
    """
    lo_t, hi_t = cfg.topics_per_community
    span = hi_t - lo_t + 1
    counts = [lo_t + (i % span) for i in range(n_communities)]
    primary = [i % cfg.n_topics for i in range(n_communities)]
    spare = [t for t in range(cfg.n_topics) if t not in set(primary)]
    n_extra = sum(c - 1 for c in counts)
    if spare:
        pool = spare[: max(1, min(len(spare), n_extra // 2))] if n_extra else spare[:1]
    else:
        pool = list(range(cfg.n_topics))
    cursor = 0
    planted_topics = {}
    for index, count in enumerate(counts):
        topics = [primary[index]]
        while len(topics) < count:
            added = False
            for _ in range(len(pool)):
                candidate = pool[cursor % len(pool)]
                cursor += 1
                if candidate not in topics:
                    topics.append(candidate)
                    added = True
                    break
            if not added:
                break
        planted_topics[index] = tuple(sorted(topics))
    return planted_topics


def generate_corpus(
    cfg: SynthConfig, partition: Partition, neighborhood_id: str = "n000"
) -> tuple[list[Timeline], dict]:
    """Background timelines: every user posts about their community's topics.

    Returns (timelines, planted_topics) where planted_topics maps community
    index -> ascending tuple of planted topic ids.
    """
    rng = np.random.default_rng(derive_seed(cfg.seed, neighborhood_id, "corpus"))
    vocab = _topic_vocabulary(cfg)
    planted_topics = _assign_topics(cfg, len(partition.communities))
    n_messages = cfg.docs_per_user * cfg.messages_per_doc
    timelines = []
    for index, community in enumerate(partition.communities):
        topics = planted_topics[index]
        primary = index % cfg.n_topics
        secondaries = [t for t in topics if t != primary]
        for user in sorted(community):
            message_topics = np.full(n_messages, primary)
            if secondaries:
                secondary_mask = rng.random(n_messages) < SECONDARY_SHARE
                picks = rng.integers(0, len(secondaries), size=n_messages)
                message_topics[secondary_mask] = np.array(secondaries)[
                    picks[secondary_mask]
                ]
            words = np.empty((n_messages, cfg.words_per_message), dtype=object)
            for topic in sorted(set(message_topics.tolist())):
                mask = message_topics == topic
                words[mask] = rng.choice(
                    vocab[topic], size=(int(mask.sum()), cfg.words_per_message)
                )
            messages = tuple(
                Message(
                    message_id=f"{user}m{i:04d}",
                    author=user,
                    timestamp=_BACKGROUND_TS + i,
                    text=" ".join(words[i]),
                )
                for i in range(n_messages)
            )
            timelines.append(Timeline(user, messages))
    timelines.sort(key=lambda t: t.user)
    return timelines, planted_topics


def _campaign_text(rng, vocab_words: np.ndarray, marker: str, length: int) -> str:
    tokens = []
    for position in range(length):
        if position % 4 == 3:
            tokens.append(marker)
        else:
            tokens.append(str(rng.choice(vocab_words)))
    return " ".join(tokens)


def _benign_authors(rng, pools: list, size: int) -> list:
    """Draw ``size`` author slots spanning as many party communities as possible.

    One author comes from each of the first min(size, len(pools)) pools, so
    a benign campaign always spans at least two communities when its party
    has them; the rest are drawn from the pooled membership.
    """
    chosen = []
    for j in range(min(size, len(pools))):
        pool = pools[j]
        chosen.append(pool[int(rng.integers(len(pool)))])
    union = [u for pool in pools for u in pool]
    left = [u for u in union if u not in set(chosen)]
    extra = size - len(chosen)
    if extra > 0:
        if extra <= len(left):
            for i in rng.choice(len(left), size=extra, replace=False):
                chosen.append(left[int(i)])
        else:
            chosen.extend(left)
            for i in rng.integers(0, len(union), size=extra - len(left)):
                chosen.append(union[int(i)])
    return sorted(set(chosen))


def generate_campaigns(
    cfg: SynthConfig,
    partition: Partition,
    planted_topics: dict,
    neighborhood_id: str = "n000",
) -> tuple[list[PlantedCampaign], list[Message], dict]:
    """Planted benign and spam campaigns.

    Returns (campaigns, messages, labels). Benign authors are drawn from the
    communities sharing the campaign topic; spam copies are spread by a few
    authors over a random community subset.
    """
    rng = np.random.default_rng(derive_seed(cfg.seed, neighborhood_id, "campaigns"))
    vocab = _topic_vocabulary(cfg)
    users_by_community = [sorted(c) for c in partition.communities]
    topic_parties: dict[int, list[int]] = {}
    for community, topics in planted_topics.items():
        for topic in topics:
            topic_parties.setdefault(topic, []).append(community)
    shared_topics = sorted(t for t, comms in topic_parties.items() if len(comms) >= 2)
    planted = sorted(topic_parties)
    lo, hi = cfg.group_size_range

    campaigns = []
    messages = []
    labels = {}
    benign_ts = _CAMPAIGN_TS
    n_background = cfg.docs_per_user * cfg.messages_per_doc

    for g in range(cfg.n_benign_groups + cfg.n_spam_groups):
        spam = g >= cfg.n_benign_groups
        marker = f"{neighborhood_id}camp{g:04d}"
        size = int(rng.integers(lo, hi + 1))
        if spam:
            n_targets = int(rng.integers(2, cfg.n_communities + 1))
            communities = sorted(
                int(c) for c in rng.choice(cfg.n_communities, size=n_targets, replace=False)
            )
            n_authors = max(1, size // 10)
            authors = []
            for i in range(n_authors):
                pool = users_by_community[communities[i % len(communities)]]
                authors.append(pool[int(rng.integers(len(pool)))])
            authors = sorted(set(authors))
            topic = int(rng.choice(planted))
            label = "app" if rng.random() < 0.15 else "spam"
        else:
            pick_from = shared_topics if shared_topics else planted
            topic = int(pick_from[int(rng.integers(len(pick_from)))])
            communities = sorted(topic_parties[topic])
            pools = [users_by_community[c] for c in communities]
            authors = _benign_authors(rng, pools, size)
            label = "quote" if rng.random() < 0.15 else "normal"
        text = _campaign_text(rng, vocab[topic], marker, cfg.words_per_message)
        copy_authors = [authors[j % len(authors)] for j in range(size)]
        message_ids = []
        for j, author in enumerate(copy_authors):
            message_id = f"{author}c{g:04d}x{j:03d}"
            message_ids.append(message_id)
            if spam:
                ts = _BACKGROUND_TS + int(rng.integers(n_background))
            else:
                ts = benign_ts
                benign_ts += 1
            messages.append(
                Message(
                    message_id=message_id,
                    author=author,
                    timestamp=ts,
                    text=text,
                )
            )
        group_id = min(message_ids)
        labels[group_id] = label
        campaigns.append(
            PlantedCampaign(
                group_id=group_id,
                label=label,
                message_ids=tuple(sorted(message_ids)),
                authors=tuple(authors),
                communities=tuple(communities),
                topic=topic,
            )
        )
    return campaigns, messages, labels


def generate_neighborhood(cfg: SynthConfig, neighborhood_id: str = "n000") -> SynthNeighborhood:
    graph, partition = generate_network(cfg, neighborhood_id)
    timelines, planted_topics = generate_corpus(cfg, partition, neighborhood_id)
    campaigns, campaign_messages, labels = generate_campaigns(
        cfg, partition, planted_topics, neighborhood_id
    )
    by_user = {timeline.user: list(timeline.messages) for timeline in timelines}
    for message in campaign_messages:
        by_user.setdefault(message.author, []).append(message)
    merged = [
        Timeline(user, tuple(sorted(by_user[user], key=lambda m: (m.timestamp, m.message_id))))
        for user in sorted(by_user)
    ]
    return SynthNeighborhood(
        neighborhood_id=neighborhood_id,
        edges=sorted(graph.edges()),
        partition=partition,
        timelines=merged,
        labels=labels,
        planted_topics=planted_topics,
        campaigns=campaigns,
    )


def write_neighborhood(neighborhood: SynthNeighborhood, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_edge_list(neighborhood.edges, directory / "edges.tsv")
    with open(directory / "timelines.jsonl", "w", encoding="utf-8") as handle:
        for timeline in neighborhood.timelines:
            for message in timeline.messages:
                handle.write(
                    json.dumps(
                        {
                            "user": message.author,
                            "id": message.message_id,
                            "ts": message.timestamp,
                            "text": message.text,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
    write_labels(neighborhood.labels, directory / "labels.csv")


def generate_dataset(cfg: SynthConfig, n_neighborhoods: int, out_dir) -> list:
    """Write n_neighborhoods synthetic neighborhoods under out_dir."""
    check_positive_int(n_neighborhoods, "n_neighborhoods")
    out_dir = Path(out_dir)
    directories = []
    for i in range(n_neighborhoods):
        neighborhood_id = f"n{i:03d}"
        data = generate_neighborhood(cfg, neighborhood_id)
        target = out_dir / neighborhood_id
        write_neighborhood(data, target)
        directories.append(target)
        logger.info("synth: wrote %s", target)
    return directories
