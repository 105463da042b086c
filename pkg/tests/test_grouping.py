"""Tests for four-gram extraction and near-duplicate grouping.

The grouping oracle is the quadratic definition: link every pair of
messages that shares a window, then take connected components and drop
singletons. The production code must agree with it exactly.
"""

import numpy as np
import pytest

from spamflow.errors import DataError
from spamflow.grouping import (
    MessageGroup,
    four_grams,
    group_similar,
    read_groups,
    write_groups,
)


def oracle_groups(messages):
    """All-pairs shared-window test plus transitive closure."""

    def windows(tokens):
        return four_grams(tokens)

    n = len(messages)
    linked = {i: {i} for i in range(n)}

    def merge(a, b):
        if linked[a] is linked[b]:
            return
        union = linked[a] | linked[b]
        for member in union:
            linked[member] = union

    for i in range(n):
        tokens_i = list(messages[i][1])
        if not tokens_i:
            continue
        grams_i = windows(tokens_i)
        for j in range(i + 1, n):
            tokens_j = list(messages[j][1])
            if not tokens_j:
                continue
            shared = False
            if grams_i & windows(tokens_j):
                shared = True
            else:
                # A short message also links when its full token tuple
                # appears as a contiguous window of the other message.
                for short, full in ((tokens_i, tokens_j), (tokens_j, tokens_i)):
                    L = len(short)
                    if L < 4 and L <= len(full):
                        for start in range(len(full) - L + 1):
                            if list(full[start : start + L]) == list(short):
                                shared = True
                                break
                    if shared:
                        break
            if shared:
                merge(i, j)

    seen = set()
    groups = set()
    for i in range(n):
        component = frozenset(linked[i])
        if component in seen or len(component) < 2:
            continue
        seen.add(component)
        groups.add(frozenset(messages[k][0] for k in component))
    return groups


def random_corpus(rng, n_messages, vocab_size=30, max_len=9):
    words = [f"w{i}" for i in range(vocab_size)]
    messages = []
    for i in range(n_messages):
        length = int(rng.integers(0, max_len))
        messages.append((f"m{i:04d}", [str(w) for w in rng.choice(words, size=length)]))
    return messages


class TestFourGrams:
    def test_standard_windows(self):
        assert four_grams(["a", "b", "c", "d", "e"]) == {
            ("a", "b", "c", "d"),
            ("b", "c", "d", "e"),
        }

    def test_short_message_single_tuple(self):
        assert four_grams(["a", "b", "c"]) == {("a", "b", "c")}

    def test_single_token(self):
        assert four_grams(["a"]) == {("a",)}

    def test_empty(self):
        assert four_grams([]) == set()

    def test_window_count_property(self):
        rng = np.random.default_rng(55)
        for _ in range(30):
            n = int(rng.integers(4, 30))
            tokens = [f"t{i}" for i in range(n)]  # all distinct
            assert len(four_grams(tokens)) == n - 3


class TestGroupSimilar:
    def test_shared_window_links(self):
        messages = [
            ("m1", ["a", "b", "c", "d", "x"]),
            ("m2", ["z", "a", "b", "c", "d"]),
        ]
        groups = group_similar(messages)
        assert len(groups) == 1
        assert groups[0].message_ids == frozenset({"m1", "m2"})

    def test_transitive_chain(self):
        messages = [
            ("m1", ["a", "b", "c", "d"]),
            ("m2", ["a", "b", "c", "d", "p", "q", "r", "s"]),
            ("m3", ["p", "q", "r", "s"]),
        ]
        groups = group_similar(messages)
        assert len(groups) == 1
        assert groups[0].message_ids == frozenset({"m1", "m2", "m3"})

    def test_no_shared_window_no_group(self):
        messages = [
            ("m1", ["a", "b", "c", "d"]),
            ("m2", ["e", "f", "g", "h"]),
        ]
        assert group_similar(messages) == []

    def test_short_message_needs_contiguous_match(self):
        messages = [
            ("m1", ["win", "free"]),
            ("m2", ["you", "win", "free", "stuff"]),
            ("m3", ["free", "win"]),
        ]
        groups = group_similar(messages)
        assert len(groups) == 1
        assert groups[0].message_ids == frozenset({"m1", "m2"})

    def test_group_id_is_min_member(self):
        messages = [
            ("m9", ["a", "b", "c", "d"]),
            ("m2", ["a", "b", "c", "d"]),
        ]
        groups = group_similar(messages)
        assert groups[0].group_id == "m2"

    def test_input_order_irrelevant(self):
        rng = np.random.default_rng(56)
        messages = random_corpus(rng, 60)
        forward = group_similar(messages)
        backward = group_similar(list(reversed(messages)))
        assert [g.message_ids for g in forward] == [g.message_ids for g in backward]

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError):
            group_similar([("m1", ["a"]), ("m1", ["b"])])

    def test_empty_messages_never_group(self):
        messages = [("m1", []), ("m2", []), ("m3", ["a", "b", "c", "d"])]
        assert group_similar(messages) == []

    def test_authors_filled_from_mapping(self):
        messages = [
            ("m1", ["a", "b", "c", "d"]),
            ("m2", ["a", "b", "c", "d"]),
        ]
        groups = group_similar(messages, author_of={"m1": "u1", "m2": "u1"})
        assert groups[0].authors == frozenset({"u1"})

    def test_matches_oracle_on_random_corpora(self):
        rng = np.random.default_rng(57)
        for trial in range(12):
            messages = random_corpus(rng, int(rng.integers(10, 90)))
            got = {g.message_ids for g in group_similar(messages)}
            assert got == oracle_groups(messages)

    def test_groups_disjoint_property(self):
        rng = np.random.default_rng(58)
        for _ in range(10):
            messages = random_corpus(rng, 80)
            groups = group_similar(messages)
            seen = set()
            for group in groups:
                assert not (group.message_ids & seen)
                seen |= group.message_ids
                assert group.size >= 2


class TestGroupIo:
    def test_round_trip(self, tmp_path):
        messages = [
            ("m1", ["a", "b", "c", "d"]),
            ("m2", ["a", "b", "c", "d"]),
            ("m3", ["p", "q", "r", "s"]),
            ("m4", ["z", "p", "q", "r", "s"]),
        ]
        groups = group_similar(messages, author_of={f"m{i}": f"u{i}" for i in range(1, 5)})
        path = tmp_path / "groups.csv"
        write_groups(groups, path)
        restored = read_groups(path, author_of={f"m{i}": f"u{i}" for i in range(1, 5)})
        assert [g.group_id for g in restored] == [g.group_id for g in groups]
        assert [g.message_ids for g in restored] == [g.message_ids for g in groups]
        assert [g.authors for g in restored] == [g.authors for g in groups]

    def test_read_without_authors(self, tmp_path):
        groups = [MessageGroup("m1", frozenset({"m1", "m2"}), frozenset({"u1"}))]
        path = tmp_path / "groups.csv"
        write_groups(groups, path)
        restored = read_groups(path)
        assert restored[0].authors == frozenset()
