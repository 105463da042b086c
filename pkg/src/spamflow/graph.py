"""Follower-graph construction, k-core extraction, and vertex partitions."""

from __future__ import annotations

import csv
import logging
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DataError
from .validation import check_non_negative_int, check_seed

logger = logging.getLogger(__name__)

__all__ = [
    "SocialGraph",
    "Partition",
    "build_graphs",
    "k_core",
    "null_partition",
    "read_edge_list",
    "write_edge_list",
    "write_partition",
    "read_partition",
]


class SocialGraph:
    """Simple graph over string vertex ids, directed or undirected.

    Undirected edges are stored in both adjacency directions but counted
    once. Self-loops are rejected; parallel edges collapse.
    """

    __slots__ = ("directed", "_out", "_in", "_n_edges")

    def __init__(self, directed: bool, edges: Iterable[tuple[str, str]] = (),
                 vertices: Iterable[str] = ()):
        self.directed = directed
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}
        self._n_edges = 0
        for v in vertices:
            self._ensure(v)
        for u, v in edges:
            self.add_edge(u, v)

    def _ensure(self, v: str) -> None:
        if v not in self._out:
            self._out[v] = set()
            self._in[v] = set()

    def add_edge(self, u: str, v: str) -> None:
        if u == v:
            raise DataError(f"self-loop on vertex {u!r} not allowed")
        self._ensure(u)
        self._ensure(v)
        if v in self._out[u]:
            return
        self._out[u].add(v)
        self._in[v].add(u)
        if not self.directed:
            self._out[v].add(u)
            self._in[u].add(v)
        self._n_edges += 1

    @property
    def n_vertices(self) -> int:
        return len(self._out)

    @property
    def n_edges(self) -> int:
        return self._n_edges

    def vertices(self) -> list[str]:
        return sorted(self._out)

    def __contains__(self, v: str) -> bool:
        return v in self._out

    def has_edge(self, u: str, v: str) -> bool:
        return u in self._out and v in self._out[u]

    def out_neighbors(self, v: str) -> set[str]:
        return self._out[v]

    def in_neighbors(self, v: str) -> set[str]:
        return self._in[v]

    def neighbors(self, v: str) -> set[str]:
        if self.directed:
            return self._out[v] | self._in[v]
        return self._out[v]

    def degree(self, v: str) -> int:
        """Undirected degree, or total (in + out) degree when directed."""
        if self.directed:
            return len(self._out[v]) + len(self._in[v])
        return len(self._out[v])

    def edges(self) -> Iterator[tuple[str, str]]:
        """Deterministic edge iteration; undirected edges appear once, u < v."""
        for u in sorted(self._out):
            for v in sorted(self._out[u]):
                if self.directed or u < v:
                    yield (u, v)

    def subgraph(self, keep: Iterable[str]) -> "SocialGraph":
        keep_set = {v for v in keep if v in self._out}
        sub = SocialGraph(self.directed, vertices=sorted(keep_set))
        for u, v in self.edges():
            if u in keep_set and v in keep_set:
                sub.add_edge(u, v)
        return sub

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"SocialGraph({kind}, {self.n_vertices} vertices, {self.n_edges} edges)"


class Partition:
    """Disjoint non-empty vertex sets; canonical order is by smallest member."""

    __slots__ = ("communities", "_membership")

    def __init__(self, communities: Iterable[Iterable[str]]):
        canonical = []
        for community in communities:
            members = frozenset(community)
            if not members:
                raise DataError("partition contains an empty community")
            canonical.append(members)
        canonical.sort(key=lambda c: min(c))
        self.communities: tuple[frozenset, ...] = tuple(canonical)
        membership: dict[str, int] = {}
        for index, community in enumerate(self.communities):
            for v in community:
                if v in membership:
                    raise DataError(f"vertex {v!r} appears in two communities")
                membership[v] = index
        self._membership = membership

    def __len__(self) -> int:
        return len(self.communities)

    def __iter__(self):
        return iter(self.communities)

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and set(self.communities) == set(other.communities)

    def __hash__(self) -> int:
        return hash(frozenset(self.communities))

    def membership(self) -> dict[str, int]:
        """Vertex -> community index (indices follow canonical order)."""
        return dict(self._membership)

    def community_of(self, v: str) -> int:
        return self._membership[v]

    def vertex_set(self) -> frozenset:
        return frozenset(self._membership)

    def sizes(self) -> list[int]:
        return [len(c) for c in self.communities]

    def __repr__(self) -> str:
        return f"Partition({len(self.communities)} communities, {len(self._membership)} vertices)"


def build_graphs(edge_list: Iterable[tuple[str, str]]) -> tuple[SocialGraph, SocialGraph]:
    """Build the directed graph and its mutual (reciprocal-edge) companion.

    Self-loops are dropped with a logged count. The undirected graph keeps
    only vertices incident to at least one reciprocal pair, so a graph with
    no mutual edges comes back empty.
    """
    pairs = set()
    self_loops = 0
    for u, v in edge_list:
        if u == v:
            self_loops += 1
            continue
        pairs.add((u, v))
    if self_loops:
        logger.warning("build_graphs: dropped %d self-loops", self_loops)
    directed = SocialGraph(directed=True)
    for u, v in sorted(pairs):
        directed.add_edge(u, v)
    undirected = SocialGraph(directed=False)
    for u, v in sorted(pairs):
        if u < v and (v, u) in pairs:
            undirected.add_edge(u, v)
    return directed, undirected


def k_core(graph: SocialGraph, k: int) -> SocialGraph:
    """Maximal subgraph in which every vertex keeps degree >= k.

    Directed graphs use total degree (in + out). Iterates removal to a
    fixpoint; the result can be empty.
    """
    k = check_non_negative_int(k, "k")
    degree = {v: graph.degree(v) for v in graph.vertices()}
    removed: set[str] = set()
    queue = [v for v in sorted(degree) if degree[v] < k]
    while queue:
        v = queue.pop()
        if v in removed:
            continue
        removed.add(v)
        for w in graph.neighbors(v):
            if w in removed:
                continue
            if graph.directed:
                drop = (w in graph._out[v]) + (w in graph._in[v])
            else:
                drop = 1
            degree[w] -= drop
            if degree[w] < k:
                queue.append(w)
    keep = [v for v in graph.vertices() if v not in removed]
    return graph.subgraph(keep)


def null_partition(sizes: Iterable[int], items: Iterable, seed: int) -> list[list]:
    """Random partition of ``items`` into groups of the given sizes.

    Size-preserving shuffle used as the null model against real communities.
    """
    seed = check_seed(seed)
    sizes = [check_non_negative_int(s, "size") for s in sizes]
    items = list(items)
    if sum(sizes) != len(items):
        raise DataError(
            f"sizes sum to {sum(sizes)} but {len(items)} items were provided"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    groups = []
    cursor = 0
    for size in sizes:
        groups.append([items[i] for i in order[cursor : cursor + size]])
        cursor += size
    return groups


def read_edge_list(path) -> list[tuple[str, str]]:
    """Read tab-separated ``src<TAB>dst`` pairs, one per line."""
    edges = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataError(f"{path}:{line_no}: expected 'src<TAB>dst', got {line!r}")
            edges.append((parts[0], parts[1]))
    return edges


def write_edge_list(edges: Iterable[tuple[str, str]], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for u, v in edges:
            handle.write(f"{u}\t{v}\n")


def write_partition(partition: Partition, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id", "community_id"])
        for index, community in enumerate(partition.communities):
            for v in sorted(community):
                writer.writerow([v, index])


def read_partition(path) -> Partition:
    groups: dict[int, list[str]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != ["user_id", "community_id"]:
            raise DataError(f"{path}: expected header user_id,community_id")
        for row in reader:
            groups.setdefault(int(row["community_id"]), []).append(row["user_id"])
    return Partition(groups[g] for g in sorted(groups))


def membership_from_partition(partition: Partition) -> Mapping[str, int]:
    return partition.membership()
