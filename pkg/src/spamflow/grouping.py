"""Near-duplicate message grouping via shared four-grams.

Messages sharing any identical window of four consecutive tokens are linked;
groups are the connected components of that relation (an inverted index over
four-grams plus union-find, so no all-pairs comparison). Messages shorter
than four tokens link only to messages containing the full token tuple as a
contiguous window. Singleton components are discarded.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DataError

logger = logging.getLogger(__name__)

__all__ = ["MessageGroup", "four_grams", "group_similar", "write_groups", "read_groups"]


@dataclass(frozen=True)
class MessageGroup:
    group_id: str
    message_ids: frozenset
    authors: frozenset

    @property
    def size(self) -> int:
        return len(self.message_ids)


def four_grams(tokens: Sequence[str]) -> set:
    """All length-4 windows; a shorter message yields its single full tuple."""
    n = len(tokens)
    if n == 0:
        return set()
    if n < 4:
        return {tuple(tokens)}
    return {tuple(tokens[i : i + 4]) for i in range(n - 3)}


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def group_similar(
    messages: Sequence[tuple[str, Sequence[str]]],
    author_of: Mapping[str, str] | None = None,
) -> list[MessageGroup]:
    """Group near-duplicate messages.

    ``messages`` is a sequence of (message_id, tokens). Token-less messages
    cannot match anything and are ignored. Returns groups of size >= 2
    sorted by group_id (the smallest member id), so output is independent
    of input order. ``author_of`` optionally fills each group's author set.
    """
    ids = [mid for mid, _ in messages]
    if len(set(ids)) != len(ids):
        raise DataError("group_similar: duplicate message ids")
    uf = _UnionFind(len(messages))

    window_owner: dict[tuple, int] = {}
    for index, (_, tokens) in enumerate(messages):
        if len(tokens) < 4:
            continue
        for gram in four_grams(tokens):
            first = window_owner.setdefault(gram, index)
            if first != index:
                uf.union(first, index)

    # Short messages: the full tuple must appear verbatim inside another
    # message, so scan every message's windows of each short length once.
    short_buckets: dict[tuple, list[int]] = {}
    for index, (_, tokens) in enumerate(messages):
        if 0 < len(tokens) < 4:
            short_buckets.setdefault(tuple(tokens), []).append(index)
    if short_buckets:
        short_lengths = sorted({len(t) for t in short_buckets})
        for index, (_, tokens) in enumerate(messages):
            tokens = tuple(tokens)
            for length in short_lengths:
                if len(tokens) < length:
                    continue
                for start in range(len(tokens) - length + 1):
                    bucket = short_buckets.get(tokens[start : start + length])
                    if bucket is not None:
                        for other in bucket:
                            uf.union(index, other)

    components: dict[int, list[int]] = {}
    for index, (_, tokens) in enumerate(messages):
        if len(tokens) == 0:
            continue
        components.setdefault(uf.find(index), []).append(index)

    groups = []
    for members in components.values():
        if len(members) < 2:
            continue
        member_ids = frozenset(ids[i] for i in members)
        if author_of is None:
            authors = frozenset()
        else:
            authors = frozenset(author_of[mid] for mid in member_ids if mid in author_of)
        groups.append(
            MessageGroup(
                group_id=min(member_ids), message_ids=member_ids, authors=authors
            )
        )
    groups.sort(key=lambda g: g.group_id)
    logger.debug("group_similar: %d messages -> %d groups", len(messages), len(groups))
    return groups


def write_groups(groups: Iterable[MessageGroup], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["group_id", "message_id"])
        for group in groups:
            for mid in sorted(group.message_ids):
                writer.writerow([group.group_id, mid])


def read_groups(path, author_of: Mapping[str, str] | None = None) -> list[MessageGroup]:
    members: dict[str, list[str]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != ["group_id", "message_id"]:
            raise DataError(f"{path}: expected header group_id,message_id")
        for row in reader:
            members.setdefault(row["group_id"], []).append(row["message_id"])
    groups = []
    for group_id in sorted(members):
        member_ids = frozenset(members[group_id])
        if author_of is None:
            authors = frozenset()
        else:
            authors = frozenset(author_of[mid] for mid in member_ids if mid in author_of)
        groups.append(MessageGroup(group_id, member_ids, authors))
    return groups
