"""Tests for the synthetic neighborhood generator."""

import json

import numpy as np
import pytest
from sklearn.metrics import normalized_mutual_info_score

from spamflow.errors import ConfigError
from spamflow.grouping import group_similar
from spamflow.ingest import clean_and_tokenize, read_timelines
from spamflow.synth import (
    SynthConfig,
    generate_campaigns,
    generate_corpus,
    generate_dataset,
    generate_neighborhood,
    generate_network,
    write_neighborhood,
)


def small_config(**overrides):
    values = dict(
        n_communities=4,
        community_size=8,
        p_in=0.6,
        p_out=0.05,
        n_topics=6,
        vocab_per_topic=50,
        docs_per_user=1,
        n_benign_groups=4,
        n_spam_groups=4,
        group_size_range=(4, 10),
        messages_per_doc=10,
        words_per_message=8,
        seed=0,
    )
    values.update(overrides)
    return SynthConfig(**values)


class TestSynthConfig:
    def test_defaults_are_valid(self):
        SynthConfig()

    def test_p_out_must_be_below_p_in(self):
        with pytest.raises(ConfigError):
            small_config(p_in=0.1, p_out=0.1)

    def test_group_size_range_validated(self):
        with pytest.raises(ConfigError):
            small_config(group_size_range=(1, 5))
        with pytest.raises(ConfigError):
            small_config(group_size_range=(6, 5))

    def test_topics_per_community_validated(self):
        with pytest.raises(ConfigError):
            small_config(topics_per_community=(0, 1))
        with pytest.raises(ConfigError):
            small_config(topics_per_community=(2, 99))

    def test_words_per_message_minimum(self):
        with pytest.raises(ConfigError):
            small_config(words_per_message=3)

    def test_positive_counts_enforced(self):
        with pytest.raises(ConfigError):
            small_config(n_communities=0)


class TestGenerateNetwork:
    def test_partition_matches_planted_blocks(self):
        cfg = small_config()
        graph, partition = generate_network(cfg, "n000")
        assert len(partition.communities) == cfg.n_communities
        assert all(len(c) == cfg.community_size for c in partition.communities)
        assert graph.n_vertices == cfg.n_communities * cfg.community_size

    def test_extreme_probabilities_give_disjoint_cliques(self):
        cfg = small_config(p_in=1.0, p_out=0.0)
        graph, partition = generate_network(cfg, "n000")
        community_of = {}
        for index, community in enumerate(partition.communities):
            for user in community:
                community_of[user] = index
        edges = set(graph.edges())
        for u, v in edges:
            assert community_of[u] == community_of[v]
        for community in partition.communities:
            members = sorted(community)
            for i, u in enumerate(members):
                for v in members[i + 1 :]:
                    assert (u, v) in edges and (v, u) in edges

    def test_reciprocal_edges(self):
        graph, _ = generate_network(small_config(), "n000")
        edges = set(graph.edges())
        assert all((v, u) in edges for u, v in edges)

    def test_planted_blocks_recoverable(self):
        cfg = small_config(
            n_communities=4, community_size=25, p_in=0.3, p_out=0.01
        )
        graph, partition = generate_network(cfg, "n000")
        from spamflow.communities import detect_communities
        from spamflow.graph import build_graphs

        _, undirected = build_graphs(graph.edges())
        detected = detect_communities(undirected, seed=0)
        truth = {}
        for index, community in enumerate(partition.communities):
            for user in community:
                truth[user] = index
        users = sorted(truth)
        found = {}
        for index, community in enumerate(detected.communities):
            for user in community:
                found[user] = index
        score = normalized_mutual_info_score(
            [truth[u] for u in users], [found[u] for u in users]
        )
        assert score >= 0.9


class TestGenerateCorpus:
    def test_message_counts_and_vocabulary(self):
        cfg = small_config()
        _, partition = generate_network(cfg, "n000")
        timelines, planted_topics = generate_corpus(cfg, partition, "n000")
        assert len(timelines) == cfg.n_communities * cfg.community_size
        expected = cfg.docs_per_user * cfg.messages_per_doc
        community_of = {}
        for index, community in enumerate(partition.communities):
            for user in community:
                community_of[user] = index
        for timeline in timelines:
            assert len(timeline.messages) == expected
            allowed = planted_topics[community_of[timeline.user]]
            for message in timeline.messages:
                topics_seen = {token[1:3] for token in message.text.split()}
                assert topics_seen <= {f"{t:02d}" for t in allowed}

    def test_primary_topics_unique_when_topics_suffice(self):
        cfg = small_config()
        _, partition = generate_network(cfg, "n000")
        _, planted_topics = generate_corpus(cfg, partition, "n000")
        primaries = [planted_topics[i][0] if len(planted_topics[i]) == 1 else None for i in planted_topics]
        # The primary topic of community i is i mod n_topics.
        for index, topics in planted_topics.items():
            assert index % cfg.n_topics in topics

    def test_some_topic_shared_by_two_communities(self):
        cfg = small_config()
        _, partition = generate_network(cfg, "n000")
        _, planted_topics = generate_corpus(cfg, partition, "n000")
        owners = {}
        for index, topics in planted_topics.items():
            for topic in topics:
                owners.setdefault(topic, []).append(index)
        assert any(len(v) >= 2 for v in owners.values())


class TestGenerateCampaigns:
    def campaigns(self, cfg=None):
        cfg = cfg or small_config()
        _, partition = generate_network(cfg, "n000")
        _, planted_topics = generate_corpus(cfg, partition, "n000")
        return cfg, planted_topics, generate_campaigns(cfg, partition, planted_topics, "n000")

    def test_counts_and_labels(self):
        cfg, _, (campaigns, messages, labels) = self.campaigns()
        assert len(campaigns) == cfg.n_benign_groups + cfg.n_spam_groups
        assert len(labels) == len(campaigns)
        for campaign in campaigns:
            assert campaign.group_id == min(campaign.message_ids)
            assert labels[campaign.group_id] == campaign.label
            if campaign.label in ("spam", "app"):
                assert len(campaign.authors) <= max(1, len(campaign.message_ids) // 10)
            else:
                assert campaign.label in ("normal", "quote")
        assert len(messages) == sum(len(c.message_ids) for c in campaigns)

    def test_author_ratio_separates_classes(self):
        cfg, _, (campaigns, _, _) = self.campaigns()
        spam_ratios = [
            len(c.authors) / len(c.message_ids)
            for c in campaigns
            if c.label in ("spam", "app")
        ]
        benign_ratios = [
            len(c.authors) / len(c.message_ids)
            for c in campaigns
            if c.label in ("normal", "quote")
        ]
        assert spam_ratios and benign_ratios
        assert max(spam_ratios) <= 0.25
        assert min(benign_ratios) >= 0.9

    def test_campaigns_span_multiple_communities(self):
        _, planted_topics, (campaigns, _, _) = self.campaigns()
        parties = {}
        for index, topics in planted_topics.items():
            for topic in topics:
                parties.setdefault(topic, []).append(index)
        for campaign in campaigns:
            assert len(campaign.communities) >= 2
            if campaign.label in ("normal", "quote"):
                assert list(campaign.communities) == sorted(parties[campaign.topic])

    def test_spam_timestamps_hide_in_background(self):
        cfg = small_config()
        neighborhood = generate_neighborhood(cfg, "n000")
        campaign_ids = {
            mid: c.label for c in neighborhood.campaigns for mid in c.message_ids
        }
        background_ts = [
            m.timestamp
            for t in neighborhood.timelines
            for m in t.messages
            if m.message_id not in campaign_ids
        ]
        low, high = min(background_ts), max(background_ts)
        for timeline in neighborhood.timelines:
            for message in timeline.messages:
                label = campaign_ids.get(message.message_id)
                if label in ("spam", "app"):
                    assert low <= message.timestamp <= high
                elif label in ("normal", "quote"):
                    assert message.timestamp > high


class TestGenerateNeighborhood:
    def test_deterministic(self):
        a = generate_neighborhood(small_config(), "n000")
        b = generate_neighborhood(small_config(), "n000")
        assert a.edges == b.edges
        assert a.labels == b.labels
        assert a.timelines == b.timelines
        assert a.planted_topics == b.planted_topics

    def test_neighborhood_ids_namespace_users(self):
        a = generate_neighborhood(small_config(), "n000")
        b = generate_neighborhood(small_config(), "n001")
        users_a = {t.user for t in a.timelines}
        users_b = {t.user for t in b.timelines}
        assert users_a.isdisjoint(users_b)

    def test_timelines_sorted_and_merged(self):
        neighborhood = generate_neighborhood(small_config(), "n000")
        users = [t.user for t in neighborhood.timelines]
        assert users == sorted(users)
        campaign_count = 0
        for timeline in neighborhood.timelines:
            keys = [(m.timestamp, m.message_id) for m in timeline.messages]
            assert keys == sorted(keys)
            campaign_count += sum(
                1 for m in timeline.messages if "c0" in m.message_id.split("m")[-1] or "x" in m.message_id
            )
        total = sum(len(t.messages) for t in neighborhood.timelines)
        background = (
            small_config().n_communities
            * small_config().community_size
            * small_config().docs_per_user
            * small_config().messages_per_doc
        )
        planted = sum(len(c.message_ids) for c in neighborhood.campaigns)
        assert total == background + planted

    def test_grouping_recovers_campaigns_exactly(self):
        neighborhood = generate_neighborhood(small_config(seed=3), "n000")
        corpus = [
            (m.message_id, clean_and_tokenize(m.text, mode="grouping"))
            for t in neighborhood.timelines
            for m in t.messages
        ]
        author_of = {
            m.message_id: m.author
            for t in neighborhood.timelines
            for m in t.messages
        }
        groups = group_similar(corpus, author_of)
        expected = {
            c.group_id: set(c.message_ids) for c in neighborhood.campaigns
        }
        found = {g.group_id: set(g.message_ids) for g in groups}
        assert found == expected
        by_id = {c.group_id: c for c in neighborhood.campaigns}
        for group in groups:
            assert group.authors == frozenset(by_id[group.group_id].authors)


class TestWriteNeighborhood:
    def test_files_round_trip(self, tmp_path):
        neighborhood = generate_neighborhood(small_config(), "n000")
        target = tmp_path / "n000"
        write_neighborhood(neighborhood, target)
        assert (target / "edges.tsv").exists()
        assert (target / "labels.csv").exists()
        timelines, report = read_timelines(target / "timelines.jsonl")
        assert report.malformed == []
        assert [t.user for t in timelines] == [t.user for t in neighborhood.timelines]
        assert sum(len(t.messages) for t in timelines) == sum(
            len(t.messages) for t in neighborhood.timelines
        )

    def test_rewrite_is_byte_identical(self, tmp_path):
        neighborhood = generate_neighborhood(small_config(), "n000")
        write_neighborhood(neighborhood, tmp_path / "a")
        write_neighborhood(neighborhood, tmp_path / "b")
        for name in ("edges.tsv", "timelines.jsonl", "labels.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_timelines_jsonl_fields(self, tmp_path):
        neighborhood = generate_neighborhood(small_config(), "n000")
        write_neighborhood(neighborhood, tmp_path / "n000")
        with open(tmp_path / "n000" / "timelines.jsonl", encoding="utf-8") as handle:
            first = json.loads(handle.readline())
        assert set(first) == {"user", "id", "ts", "text"}


class TestGenerateDataset:
    def test_writes_numbered_directories(self, tmp_path):
        directories = generate_dataset(small_config(), 3, tmp_path)
        assert [d.name for d in directories] == ["n000", "n001", "n002"]
        for directory in directories:
            assert (directory / "timelines.jsonl").exists()

    def test_count_validated(self, tmp_path):
        with pytest.raises(ConfigError):
            generate_dataset(small_config(), 0, tmp_path)
