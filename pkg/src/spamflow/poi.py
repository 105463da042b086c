"""Propagation probability tables: who spreads a message group, and where.

For each message group within a neighborhood we record, per community, how
many of the group's messages were authored there and by how many distinct
authors. Those observations aggregate into a per-topic count vector (a
message counts toward every topic its author's community discusses) that
normalizes into the group's topic probability row. The classifier consumes
the row plus the group's author/message ratio.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .grouping import MessageGroup
from .topics import CommunityTopics

logger = logging.getLogger(__name__)

__all__ = [
    "CommunityObservation",
    "GroupObservation",
    "PoIVector",
    "ProbTable",
    "TableReport",
    "observe_group",
    "topic_axis",
    "counts_from_observation",
    "poi_counts",
    "normalize",
    "build_prob_table",
    "table_from_observations",
    "feature_vector",
    "assemble_features",
    "read_prob_table",
    "write_prob_table",
    "write_observations",
    "read_observations",
]


@dataclass(frozen=True)
class CommunityObservation:
    messages: int
    authors: int


@dataclass(frozen=True)
class GroupObservation:
    """Per-community message/author counts for one group in one neighborhood."""

    group_id: str
    per_community: Mapping[int, CommunityObservation]

    @property
    def message_total(self) -> int:
        return sum(o.messages for o in self.per_community.values())

    @property
    def author_total(self) -> int:
        # Authors in different communities are distinct users, so the sum
        # over communities counts each contributing author exactly once.
        return sum(o.authors for o in self.per_community.values())

    def user_ratio(self) -> float:
        total = self.message_total
        return self.author_total / total if total else 0.0


@dataclass(frozen=True)
class PoIVector:
    group_id: str
    counts: np.ndarray
    probs: np.ndarray


@dataclass
class TableReport:
    skipped_messages: int = 0
    zero_topic_communities: tuple = ()
    empty_groups: int = 0


@dataclass
class ProbTable:
    neighborhood_id: str
    topic_axis: tuple
    rows: list
    observations: dict
    profiles: list
    report: TableReport = field(default_factory=TableReport)

    def row_ids(self) -> list:
        return [row.group_id for row in self.rows]


def observe_group(
    group: MessageGroup,
    membership: Mapping[str, int],
    author_of: Mapping[str, str],
) -> tuple[GroupObservation, int]:
    """Count the group's messages and distinct authors per community.

    Messages whose author is unknown or has no community are skipped; the
    skip count is returned alongside the observation.
    """
    messages: dict[int, int] = {}
    authors: dict[int, set] = {}
    skipped = 0
    for mid in sorted(group.message_ids):
        author = author_of.get(mid)
        community = membership.get(author) if author is not None else None
        if community is None:
            skipped += 1
            continue
        messages[community] = messages.get(community, 0) + 1
        authors.setdefault(community, set()).add(author)
    per_community = {
        community: CommunityObservation(messages[community], len(authors[community]))
        for community in sorted(messages)
    }
    return GroupObservation(group.group_id, per_community), skipped


def topic_axis(profiles: Iterable[CommunityTopics]) -> tuple:
    """Ascending union of the communities' unique topics."""
    topics: set[int] = set()
    for profile in profiles:
        topics.update(profile.unique_topics)
    return tuple(sorted(topics))


def counts_from_observation(
    observation: GroupObservation,
    profiles_by_id: Mapping[int, CommunityTopics],
    axis: Sequence[int],
) -> np.ndarray:
    """Per-topic message counts: each message counts once per topic its
    author's community discusses."""
    position = {topic: j for j, topic in enumerate(axis)}
    counts = np.zeros(len(axis))
    for community, obs in observation.per_community.items():
        profile = profiles_by_id.get(community)
        if profile is None:
            continue
        for topic in profile.unique_topics:
            counts[position[topic]] += obs.messages
    return counts


def poi_counts(
    group: MessageGroup,
    community_topics: Iterable[CommunityTopics],
    membership: Mapping[str, int],
    author_of: Mapping[str, str],
) -> tuple[np.ndarray, int]:
    """Count vector for one group over the neighborhood's topic axis.

    Returns (counts, skipped_messages).
    """
    profiles = list(community_topics)
    axis = topic_axis(profiles)
    profiles_by_id = {p.community_id: p for p in profiles}
    observation, skipped = observe_group(group, membership, author_of)
    return counts_from_observation(observation, profiles_by_id, axis), skipped


def normalize(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0.0:
        return np.zeros_like(counts)
    return counts / total


def build_prob_table(
    groups: Iterable[MessageGroup],
    community_topics: Iterable[CommunityTopics],
    membership: Mapping[str, int],
    neighborhood_id: str,
    author_of: Mapping[str, str],
) -> ProbTable:
    """One probability row per group with at least one counted message here.

    Communities whose members produced no topics contribute nothing; they
    are listed in the table report rather than failing the build.
    """
    profiles = sorted(community_topics, key=lambda p: p.community_id)
    observations = {}
    skipped = 0
    empty_groups = 0
    for group in sorted(groups, key=lambda g: g.group_id):
        observation, n_skipped = observe_group(group, membership, author_of)
        skipped += n_skipped
        if observation.message_total == 0:
            empty_groups += 1
            continue
        observations[observation.group_id] = observation
    communities_seen = {c for o in observations.values() for c in o.per_community}
    with_topics = {p.community_id for p in profiles}
    report = TableReport(
        skipped_messages=skipped,
        zero_topic_communities=tuple(sorted(communities_seen - with_topics)),
        empty_groups=empty_groups,
    )
    return table_from_observations(neighborhood_id, observations, profiles, report)


def table_from_observations(
    neighborhood_id: str,
    observations: Mapping[str, GroupObservation],
    profiles: Sequence[CommunityTopics],
    report: TableReport | None = None,
) -> ProbTable:
    axis = topic_axis(profiles)
    profiles_by_id = {p.community_id: p for p in profiles}
    rows = []
    for group_id in sorted(observations):
        counts = counts_from_observation(observations[group_id], profiles_by_id, axis)
        rows.append(PoIVector(group_id, counts, normalize(counts)))
    return ProbTable(
        neighborhood_id=neighborhood_id,
        topic_axis=axis,
        rows=rows,
        observations=dict(sorted(observations.items())),
        profiles=list(profiles),
        report=report or TableReport(),
    )


def feature_vector(row: PoIVector, group: MessageGroup) -> np.ndarray:
    """Probability row with the group's author/message ratio appended."""
    if not group.message_ids:
        raise DataError("feature_vector: empty group")
    ratio = len(group.authors) / len(group.message_ids)
    return np.concatenate([row.probs, [ratio]])


def assemble_features(
    table: ProbTable, overrides: Mapping[str, GroupObservation] | None = None
) -> np.ndarray:
    """Feature matrix over the table's rows, recomputed from observations.

    ``overrides`` substitutes modified observations (masking, poisoning)
    for selected groups; rows keep their position.
    """
    profiles_by_id = {p.community_id: p for p in table.profiles}
    features = np.zeros((len(table.rows), len(table.topic_axis) + 1))
    for i, row in enumerate(table.rows):
        observation = table.observations[row.group_id]
        if overrides is not None and row.group_id in overrides:
            observation = overrides[row.group_id]
        counts = counts_from_observation(observation, profiles_by_id, table.topic_axis)
        features[i, :-1] = normalize(counts)
        features[i, -1] = observation.user_ratio()
    return features


def write_prob_table(table: ProbTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["group_id"] + [f"t_{topic}" for topic in table.topic_axis] + ["user_ratio"]
        )
        for row in table.rows:
            ratio = table.observations[row.group_id].user_ratio()
            writer.writerow(
                [row.group_id] + [repr(float(p)) for p in row.probs] + [repr(ratio)]
            )


def read_prob_table(path) -> tuple[list, np.ndarray, tuple]:
    """Read a prob-table CSV back as (group_ids, feature matrix, topic axis).

    Feature columns are the written probabilities plus the trailing
    user_ratio, so the matrix matches assemble_features on the same table.
    """
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if (
            not header
            or header[0] != "group_id"
            or header[-1] != "user_ratio"
            or any(not name.startswith("t_") for name in header[1:-1])
        ):
            raise DataError(f"{path}: expected header group_id,t_*,...,user_ratio")
        axis = tuple(int(name[2:]) for name in header[1:-1])
        group_ids = []
        rows = []
        for record in reader:
            if len(record) != len(header):
                raise DataError(f"{path}: row width mismatch for {record[:1]}")
            group_ids.append(record[0])
            rows.append([float(value) for value in record[1:]])
    features = np.array(rows) if rows else np.zeros((0, len(axis) + 1))
    return group_ids, features, axis


def write_observations(table: ProbTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["group_id", "community_id", "messages", "authors"])
        for group_id in sorted(table.observations):
            observation = table.observations[group_id]
            for community in sorted(observation.per_community):
                obs = observation.per_community[community]
                writer.writerow([group_id, community, obs.messages, obs.authors])


def read_observations(path) -> dict:
    observations: dict[str, dict[int, CommunityObservation]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        expected = ["group_id", "community_id", "messages", "authors"]
        if reader.fieldnames != expected:
            raise DataError(f"{path}: expected header {','.join(expected)}")
        for record in reader:
            observations.setdefault(record["group_id"], {})[int(record["community_id"])] = (
                CommunityObservation(int(record["messages"]), int(record["authors"]))
            )
    return {
        group_id: GroupObservation(group_id, per_community)
        for group_id, per_community in sorted(observations.items())
    }
