"""Community detection by two-level map-equation minimization.

The objective is the expected per-step description length (bits) of a random
walk encoded with one index codebook plus one codebook per module:

    L(M) = plogp(q) - 2 * sum_i plogp(q_i) + sum_i plogp(q_i + P_i)
           - sum_a plogp(p_a)

with plogp(x) = x * log2(x), q_i the exit rate of module i (link flow leaving
the module plus teleportation mass scaled by the fraction of vertices
outside), q the total exit rate, P_i the visit rate inside module i, and p_a
the per-vertex visit rates. Visit rates are degree-proportional on undirected
graphs and come from a teleporting power iteration on directed graphs.

Optimization is a seeded local-moving pass (each vertex greedily joins the
neighboring module that lowers L) alternated with module aggregation, with
random restarts. Modularity maximization is available as an alternative
objective under the same optimizer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .graph import Partition, SocialGraph
from .validation import check_positive_int, check_seed

logger = logging.getLogger(__name__)

__all__ = [
    "detect_communities",
    "map_equation_codelength",
    "modularity",
    "visit_rates",
]

TELEPORT = 0.15
PAGERANK_TOL = 1e-12
PAGERANK_MAX_ITER = 1000
GAIN_EPS = 1e-12
MAX_SWEEPS = 200


def _plogp(x: float) -> float:
    return x * math.log2(x) if x > 0.0 else 0.0


def _plogp_vec(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    positive = x > 0.0
    out[positive] = x[positive] * np.log2(x[positive])
    return out


@dataclass
class _Flow:
    """Random-walk flow at one aggregation level."""

    n_nodes: int
    n_original: int
    node_flow: np.ndarray
    teleport: np.ndarray
    sizes: np.ndarray
    out_links: list
    in_links: list


def _pagerank(graph: SocialGraph, vertices: list, index: dict) -> np.ndarray:
    n = len(vertices)
    out_deg = np.array([len(graph.out_neighbors(v)) for v in vertices], dtype=float)
    targets = [
        np.array(sorted(index[w] for w in graph.out_neighbors(v)), dtype=np.int64)
        for v in vertices
    ]
    p = np.full(n, 1.0 / n)
    for _ in range(PAGERANK_MAX_ITER):
        nxt = np.zeros(n)
        dangling = 0.0
        for i in range(n):
            if out_deg[i] == 0.0:
                dangling += p[i]
            else:
                nxt[targets[i]] += p[i] / out_deg[i]
        nxt = TELEPORT / n + (1.0 - TELEPORT) * (nxt + dangling / n)
        if np.abs(nxt - p).sum() < PAGERANK_TOL:
            p = nxt
            break
        p = nxt
    return p


def _flow_from_graph(graph: SocialGraph) -> _Flow:
    vertices = graph.vertices()
    n = len(vertices)
    index = {v: i for i, v in enumerate(vertices)}
    links: dict[tuple[int, int], float] = {}
    if graph.directed:
        p = _pagerank(graph, vertices, index)
        teleport = np.empty(n)
        for i, v in enumerate(vertices):
            out = sorted(graph.out_neighbors(v))
            if out:
                teleport[i] = TELEPORT * p[i]
                share = (1.0 - TELEPORT) * p[i] / len(out)
                for w in out:
                    links[(i, index[w])] = share
            else:
                # Dangling vertices leave only by teleporting.
                teleport[i] = p[i]
    else:
        m = graph.n_edges
        teleport = np.zeros(n)
        if m == 0:
            p = np.full(n, 1.0 / n)
        else:
            p = np.array([graph.degree(v) for v in vertices], dtype=float) / (2.0 * m)
            for u, v in graph.edges():
                i, j = index[u], index[v]
                links[(i, j)] = 1.0 / (2.0 * m)
                links[(j, i)] = 1.0 / (2.0 * m)
    out_links = [[] for _ in range(n)]
    in_links = [[] for _ in range(n)]
    for (i, j), f in sorted(links.items()):
        out_links[i].append((j, f))
        in_links[j].append((i, f))
    return _Flow(
        n_nodes=n,
        n_original=n,
        node_flow=p,
        teleport=teleport,
        sizes=np.ones(n),
        out_links=out_links,
        in_links=in_links,
    )


def visit_rates(graph: SocialGraph) -> dict[str, float]:
    """Stationary visit rate per vertex (degree-based or teleporting walk)."""
    if graph.n_vertices == 0:
        raise DataError("visit_rates: graph has no vertices")
    flow = _flow_from_graph(graph)
    return dict(zip(graph.vertices(), flow.node_flow.tolist()))


def _module_stats(flow: _Flow, assign: np.ndarray, n_modules: int):
    mod_p = np.bincount(assign, weights=flow.node_flow, minlength=n_modules)
    mod_t = np.bincount(assign, weights=flow.teleport, minlength=n_modules)
    mod_n = np.bincount(assign, weights=flow.sizes, minlength=n_modules)
    mod_exit = np.zeros(n_modules)
    for i in range(flow.n_nodes):
        mi = assign[i]
        for j, f in flow.out_links[i]:
            if assign[j] != mi:
                mod_exit[mi] += f
    return mod_p, mod_t, mod_n, mod_exit


def _codelength(flow: _Flow, assign: np.ndarray, n_modules: int) -> float:
    mod_p, mod_t, mod_n, mod_exit = _module_stats(flow, assign, n_modules)
    n = flow.n_original
    q = mod_t * (n - mod_n) / n + mod_exit
    node_term = float(_plogp_vec(flow.node_flow).sum())
    return float(
        _plogp(q.sum()) - 2.0 * _plogp_vec(q).sum() + _plogp_vec(q + mod_p).sum() - node_term
    )


def map_equation_codelength(graph: SocialGraph, partition: Partition) -> float:
    """Two-level description length (bits per step) of a partition."""
    if graph.n_vertices == 0:
        raise DataError("map_equation_codelength: graph has no vertices")
    vertices = graph.vertices()
    if partition.vertex_set() != frozenset(vertices):
        raise DataError("partition does not cover exactly the graph's vertices")
    flow = _flow_from_graph(graph)
    index = {v: i for i, v in enumerate(vertices)}
    assign = np.zeros(len(vertices), dtype=np.int64)
    for mi, community in enumerate(partition.communities):
        for v in community:
            assign[index[v]] = mi
    return _codelength(flow, assign, len(partition.communities))


class _MapObjective:
    """Incremental map-equation cost over one aggregation level."""

    def __init__(self, flow: _Flow, node_const: float):
        self.flow = flow
        self.node_const = node_const
        n = flow.n_nodes
        self.n_nodes = n
        self.module = np.arange(n)
        self.mod_p = flow.node_flow.astype(float).copy()
        self.mod_t = flow.teleport.astype(float).copy()
        self.mod_n = flow.sizes.astype(float).copy()
        self.node_out = np.array(
            [math.fsum(f for _, f in flow.out_links[i]) for i in range(n)]
        )
        self.mod_exit = self.node_out.copy()
        self._refresh()

    def _refresh(self) -> None:
        n = self.flow.n_original
        self.mod_q = np.maximum(
            self.mod_t * (n - self.mod_n) / n + self.mod_exit, 0.0
        )
        self.q_tot = float(self.mod_q.sum())
        self.sum_plogp_q = float(_plogp_vec(self.mod_q).sum())
        self.sum_plogp_qp = float(_plogp_vec(self.mod_q + self.mod_p).sum())
        self.cost_value = self._cost_from_sums(
            self.q_tot, self.sum_plogp_q, self.sum_plogp_qp
        )

    def _cost_from_sums(self, q_tot, spq, spqp) -> float:
        return _plogp(q_tot) - 2.0 * spq + spqp - self.node_const

    def gather(self, a: int) -> dict:
        acc: dict[int, tuple[float, float]] = {}
        module = self.module
        for b, f in self.flow.out_links[a]:
            m = module[b]
            to, fr = acc.get(m, (0.0, 0.0))
            acc[m] = (to + f, fr)
        for b, f in self.flow.in_links[a]:
            m = module[b]
            to, fr = acc.get(m, (0.0, 0.0))
            acc[m] = (to, fr + f)
        return acc

    def _move_quantities(self, a: int, target: int, flows: dict):
        cur = int(self.module[a])
        p_a = self.flow.node_flow[a]
        t_a = self.flow.teleport[a]
        s_a = self.flow.sizes[a]
        fout = self.node_out[a]
        to_cur, from_cur = flows.get(cur, (0.0, 0.0))
        to_tgt, from_tgt = flows.get(target, (0.0, 0.0))
        n = self.flow.n_original
        exit_cur = max(self.mod_exit[cur] - (fout - to_cur) + from_cur, 0.0)
        exit_tgt = max(self.mod_exit[target] + (fout - to_tgt) - from_tgt, 0.0)
        q_cur = max(
            (self.mod_t[cur] - t_a) * (n - (self.mod_n[cur] - s_a)) / n + exit_cur, 0.0
        )
        q_tgt = (self.mod_t[target] + t_a) * (n - (self.mod_n[target] + s_a)) / n + exit_tgt
        return cur, p_a, t_a, s_a, exit_cur, exit_tgt, q_cur, q_tgt

    def evaluate(self, a: int, target: int, flows: dict) -> float:
        cur, p_a, _, _, _, _, q_cur, q_tgt = self._move_quantities(a, target, flows)
        qA, qB = self.mod_q[cur], self.mod_q[target]
        pA, pB = self.mod_p[cur], self.mod_p[target]
        q_tot = self.q_tot - qA - qB + q_cur + q_tgt
        spq = self.sum_plogp_q - _plogp(qA) - _plogp(qB) + _plogp(q_cur) + _plogp(q_tgt)
        spqp = (
            self.sum_plogp_qp
            - _plogp(qA + pA)
            - _plogp(qB + pB)
            + _plogp(q_cur + pA - p_a)
            + _plogp(q_tgt + pB + p_a)
        )
        return self._cost_from_sums(q_tot, spq, spqp)

    def apply(self, a: int, target: int, flows: dict) -> None:
        cur, p_a, t_a, s_a, exit_cur, exit_tgt, q_cur, q_tgt = self._move_quantities(
            a, target, flows
        )
        qA, qB = self.mod_q[cur], self.mod_q[target]
        pA, pB = self.mod_p[cur], self.mod_p[target]
        self.q_tot += q_cur + q_tgt - qA - qB
        self.sum_plogp_q += _plogp(q_cur) + _plogp(q_tgt) - _plogp(qA) - _plogp(qB)
        self.sum_plogp_qp += (
            _plogp(q_cur + pA - p_a)
            + _plogp(q_tgt + pB + p_a)
            - _plogp(qA + pA)
            - _plogp(qB + pB)
        )
        self.mod_exit[cur] = exit_cur
        self.mod_exit[target] = exit_tgt
        self.mod_q[cur] = q_cur
        self.mod_q[target] = q_tgt
        self.mod_p[cur] -= p_a
        self.mod_p[target] += p_a
        self.mod_t[cur] -= t_a
        self.mod_t[target] += t_a
        self.mod_n[cur] -= s_a
        self.mod_n[target] += s_a
        self.module[a] = target
        self.cost_value = self._cost_from_sums(
            self.q_tot, self.sum_plogp_q, self.sum_plogp_qp
        )


class _ModularityObjective:
    """Incremental negative modularity over one aggregation level."""

    def __init__(self, level: "_WeightLevel"):
        self.level = level
        n = level.n_nodes
        self.n_nodes = n
        self.module = np.arange(n)
        self.mod_in = level.in_strength.astype(float).copy()
        self.mod_out = level.out_strength.astype(float).copy()
        self.mod_e = level.self_weight.astype(float).copy()
        self.m = level.total_weight
        self._refresh()

    def _refresh(self) -> None:
        self.sum_e = float(self.mod_e.sum())
        self.sum_io = float((self.mod_in * self.mod_out).sum())
        self.cost_value = self._cost(self.sum_e, self.sum_io)

    def _cost(self, sum_e, sum_io) -> float:
        return -(sum_e / self.m - sum_io / (self.m * self.m))

    def gather(self, a: int) -> dict:
        acc: dict[int, tuple[float, float]] = {}
        module = self.module
        for b, f in self.level.out_links[a]:
            m = module[b]
            to, fr = acc.get(m, (0.0, 0.0))
            acc[m] = (to + f, fr)
        for b, f in self.level.in_links[a]:
            m = module[b]
            to, fr = acc.get(m, (0.0, 0.0))
            acc[m] = (to, fr + f)
        return acc

    def _sums_after(self, a: int, target: int, flows: dict):
        cur = int(self.module[a])
        lv = self.level
        to_cur, from_cur = flows.get(cur, (0.0, 0.0))
        to_tgt, from_tgt = flows.get(target, (0.0, 0.0))
        in_a, out_a, self_a = lv.in_strength[a], lv.out_strength[a], lv.self_weight[a]
        eA2 = self.mod_e[cur] - to_cur - from_cur - self_a
        eB2 = self.mod_e[target] + to_tgt + from_tgt + self_a
        inA2, outA2 = self.mod_in[cur] - in_a, self.mod_out[cur] - out_a
        inB2, outB2 = self.mod_in[target] + in_a, self.mod_out[target] + out_a
        sum_e = self.sum_e - self.mod_e[cur] - self.mod_e[target] + eA2 + eB2
        sum_io = (
            self.sum_io
            - self.mod_in[cur] * self.mod_out[cur]
            - self.mod_in[target] * self.mod_out[target]
            + inA2 * outA2
            + inB2 * outB2
        )
        return cur, eA2, eB2, inA2, outA2, inB2, outB2, sum_e, sum_io

    def evaluate(self, a: int, target: int, flows: dict) -> float:
        *_, sum_e, sum_io = self._sums_after(a, target, flows)
        return self._cost(sum_e, sum_io)

    def apply(self, a: int, target: int, flows: dict) -> None:
        cur, eA2, eB2, inA2, outA2, inB2, outB2, sum_e, sum_io = self._sums_after(
            a, target, flows
        )
        self.mod_e[cur], self.mod_e[target] = eA2, eB2
        self.mod_in[cur], self.mod_out[cur] = inA2, outA2
        self.mod_in[target], self.mod_out[target] = inB2, outB2
        self.sum_e, self.sum_io = sum_e, sum_io
        self.module[a] = target
        self.cost_value = self._cost(sum_e, sum_io)


def _local_moving(obj, rng, trace: list) -> bool:
    """Greedy sweeps; returns True when at least one move was accepted."""
    moved_any = False
    for _ in range(MAX_SWEEPS):
        moved = False
        for a in rng.permutation(obj.n_nodes):
            a = int(a)
            cur = int(obj.module[a])
            flows = obj.gather(a)
            best_target, best_cost = cur, obj.cost_value
            for target in sorted(flows):
                if target == cur:
                    continue
                cost = obj.evaluate(a, target, flows)
                if cost < best_cost - GAIN_EPS:
                    best_target, best_cost = target, cost
            if best_target != cur:
                obj.apply(a, best_target, flows)
                trace.append(obj.cost_value)
                moved = moved_any = True
        if not moved:
            break
    return moved_any


def _compact(assign: np.ndarray) -> tuple[np.ndarray, int]:
    uniques, compacted = np.unique(assign, return_inverse=True)
    return compacted, len(uniques)


def _aggregate_flow(flow: _Flow, module: np.ndarray, n_mod: int) -> _Flow:
    node_flow = np.bincount(module, weights=flow.node_flow, minlength=n_mod)
    teleport = np.bincount(module, weights=flow.teleport, minlength=n_mod)
    sizes = np.bincount(module, weights=flow.sizes, minlength=n_mod)
    links: dict[tuple[int, int], float] = {}
    for i in range(flow.n_nodes):
        mi = int(module[i])
        for j, f in flow.out_links[i]:
            mj = int(module[j])
            if mi != mj:
                links[(mi, mj)] = links.get((mi, mj), 0.0) + f
    out_links = [[] for _ in range(n_mod)]
    in_links = [[] for _ in range(n_mod)]
    for (i, j), f in sorted(links.items()):
        out_links[i].append((j, f))
        in_links[j].append((i, f))
    return _Flow(
        n_nodes=n_mod,
        n_original=flow.n_original,
        node_flow=node_flow,
        teleport=teleport,
        sizes=sizes,
        out_links=out_links,
        in_links=in_links,
    )


@dataclass
class _WeightLevel:
    n_nodes: int
    out_strength: np.ndarray
    in_strength: np.ndarray
    self_weight: np.ndarray
    out_links: list
    in_links: list
    total_weight: float


def _weights_from_graph(graph: SocialGraph) -> _WeightLevel:
    vertices = graph.vertices()
    n = len(vertices)
    index = {v: i for i, v in enumerate(vertices)}
    links: dict[tuple[int, int], float] = {}
    for u, v in graph.edges():
        i, j = index[u], index[v]
        links[(i, j)] = links.get((i, j), 0.0) + 1.0
        if not graph.directed:
            links[(j, i)] = links.get((j, i), 0.0) + 1.0
    out_strength = np.zeros(n)
    in_strength = np.zeros(n)
    for (i, j), w in links.items():
        out_strength[i] += w
        in_strength[j] += w
    out_links = [[] for _ in range(n)]
    in_links = [[] for _ in range(n)]
    for (i, j), w in sorted(links.items()):
        out_links[i].append((j, w))
        in_links[j].append((i, w))
    return _WeightLevel(
        n_nodes=n,
        out_strength=out_strength,
        in_strength=in_strength,
        self_weight=np.zeros(n),
        out_links=out_links,
        in_links=in_links,
        total_weight=float(sum(links.values())),
    )


def _aggregate_weights(level: _WeightLevel, module: np.ndarray, n_mod: int) -> _WeightLevel:
    out_strength = np.bincount(module, weights=level.out_strength, minlength=n_mod)
    in_strength = np.bincount(module, weights=level.in_strength, minlength=n_mod)
    self_weight = np.bincount(module, weights=level.self_weight, minlength=n_mod)
    links: dict[tuple[int, int], float] = {}
    for i in range(level.n_nodes):
        mi = int(module[i])
        for j, w in level.out_links[i]:
            mj = int(module[j])
            if mi == mj:
                self_weight[mi] += w
            else:
                links[(mi, mj)] = links.get((mi, mj), 0.0) + w
    out_links = [[] for _ in range(n_mod)]
    in_links = [[] for _ in range(n_mod)]
    for (i, j), w in sorted(links.items()):
        out_links[i].append((j, w))
        in_links[j].append((i, w))
    return _WeightLevel(
        n_nodes=n_mod,
        out_strength=out_strength,
        in_strength=in_strength,
        self_weight=self_weight,
        out_links=out_links,
        in_links=in_links,
        total_weight=level.total_weight,
    )


def modularity(graph: SocialGraph, partition: Partition) -> float:
    """Directed modularity; undirected graphs are evaluated symmetrized."""
    if graph.n_edges == 0:
        raise DataError("modularity: graph has no edges")
    if partition.vertex_set() != frozenset(graph.vertices()):
        raise DataError("partition does not cover exactly the graph's vertices")
    membership = partition.membership()
    h = len(partition)
    e_in = np.zeros(h)
    sum_out = np.zeros(h)
    sum_in = np.zeros(h)
    m = 0.0
    for u, v in graph.edges():
        weights = [(u, v)] if graph.directed else [(u, v), (v, u)]
        for a, b in weights:
            m += 1.0
            sum_out[membership[a]] += 1.0
            sum_in[membership[b]] += 1.0
            if membership[a] == membership[b]:
                e_in[membership[a]] += 1.0
    return float((e_in / m - sum_in * sum_out / (m * m)).sum())


def _minimize(level, objective_cls, aggregate, rng, trace: list) -> np.ndarray:
    orig = np.arange(level.n_nodes)
    while True:
        obj = objective_cls(level)
        if not trace:
            trace.append(obj.cost_value)
        moved = _local_moving(obj, rng, trace)
        module, n_mod = _compact(obj.module)
        if not moved or n_mod == level.n_nodes:
            return module[orig] if moved else orig
        orig = module[orig]
        if n_mod == 1:
            return orig
        level = aggregate(level, module, n_mod)


def detect_communities(
    graph: SocialGraph,
    method: str = "map-equation",
    seed: int = 0,
    restarts: int = 10,
    return_trace: bool = False,
):
    """Partition a graph into communities.

    ``method`` is "map-equation" (minimize description length) or
    "modularity" (maximize modularity). Runs ``restarts`` seeded
    optimizations and keeps the best final objective; fully deterministic
    for a fixed (graph, method, seed, restarts).
    """
    if method not in ("map-equation", "modularity"):
        raise ConfigError(f"unknown community detection method {method!r}")
    seed = check_seed(seed)
    restarts = check_positive_int(restarts, "restarts")
    if graph.n_vertices == 0:
        raise DataError("detect_communities: graph has no vertices")
    vertices = graph.vertices()
    if graph.n_edges == 0:
        partition = Partition([[v] for v in vertices])
        return (partition, []) if return_trace else partition

    if method == "map-equation":
        level0 = _flow_from_graph(graph)
        node_const = float(_plogp_vec(level0.node_flow).sum())
        objective_cls = lambda level: _MapObjective(level, node_const)
        aggregate = _aggregate_flow
        score = lambda p: map_equation_codelength(graph, p)
    else:
        level0 = _weights_from_graph(graph)
        objective_cls = _ModularityObjective
        aggregate = _aggregate_weights
        score = lambda p: -modularity(graph, p)

    rng = np.random.default_rng(seed)
    best_partition = None
    best_score = math.inf
    traces = []
    for _ in range(restarts):
        trace: list[float] = []
        assign = _minimize(level0, objective_cls, aggregate, rng, trace)
        members: dict[int, list] = {}
        for v, mi in zip(vertices, assign):
            members.setdefault(int(mi), []).append(v)
        partition = Partition(members.values())
        value = score(partition)
        traces.append(trace)
        if value < best_score - GAIN_EPS:
            best_partition = partition
            best_score = value
    logger.debug(
        "detect_communities: %s found %d communities (objective %.6f)",
        method,
        len(best_partition),
        best_score,
    )
    if return_trace:
        return best_partition, traces
    return best_partition
