"""Typical pairs, supporting edges and the adversarial terminal demand."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .clustering import (
    ClusterParams,
    ClusteringAborted,
    ClusteringState,
    HierarchyContext,
    cluster_diameter_check,
    friend_lists,
    run_hierarchy,
)
from .graph import (
    INF,
    CapacitatedGraph,
    ContractedGraph,
    Demand,
    FlowPath,
    GraphError,
    HPath,
    Partition,
    bfs_distances,
    induce_path,
)
from .routing import TerminalRouting, route_to_terminals

log = logging.getLogger(__name__)

STOP_COMPLETE = "complete"
STOP_USELESS = "useless-budget"
STOP_BAD = "bad-budget"
STOP_NO_PAIR = "no-typical-pair"
ABORTING = {STOP_BAD, STOP_NO_PAIR}


class NoTypicalPair(RuntimeError):
    pass


@dataclass(frozen=True)
class TypicalPair:
    u: int
    v: int
    hpath: tuple[int, ...]  # base clusters F(u) .. F(v) in the level-0 friendship graph
    dist: int
    group: int
    purity: Fraction  # non-useless share of the chosen group


def _friend_path(h0: Sequence[Sequence[int]], a: int, b: int) -> tuple[int, ...]:
    """Shortest path in the friendship graph, lowest-id neighbors explored first."""
    parent = {a: a}
    queue = deque([a])
    while queue:
        x = queue.popleft()
        if x == b:
            break
        for y in h0[x]:
            if y not in parent:
                parent[y] = x
                queue.append(y)
    if b not in parent:
        raise NoTypicalPair(f"clusters {a} and {b} are not connected by friendships")
    path = [b]
    while path[-1] != a:
        path.append(parent[path[-1]])
    return tuple(reversed(path))


def find_typical_pair(
    g: CapacitatedGraph,
    p: Partition,
    state: ClusteringState,
    h0: Sequence[Sequence[int]],
) -> TypicalPair:
    """Pick the far pair inside the purest surviving top-level group.

    Groups with fewer than two non-useless vertices cannot host a pair and
    are skipped.
    """
    useless = state.useless
    members = p.clusters
    best = None
    for gid, grp in enumerate(state.family):
        verts = [v for c in grp for v in members[c]]
        live = [v for v in verts if v not in useless]
        if len(live) < 2:
            continue
        ratio = Fraction(len(live), len(verts))
        if best is None or ratio > best[0]:
            best = (ratio, gid, live)
    if best is None:
        raise NoTypicalPair("no surviving group holds two non-useless vertices")
    ratio, gid, live = best
    live.sort()
    u = live[0]
    dist = bfs_distances(g, [u])
    far, v = -1, -1
    for x in live[1:]:
        if dist[x] != INF and dist[x] > far:
            far, v = dist[x], x
    if v < 0:
        raise NoTypicalPair(f"vertex {u} reaches no other vertex of its group")
    return TypicalPair(u, v, _friend_path(h0, p[u], p[v]), far, gid, ratio)


def supporting_edge_set(
    hpath: Sequence[int],
    g: CapacitatedGraph,
    p: Partition,
    useless,
    ctx: HierarchyContext | None = None,
) -> list[int]:
    """One G-edge per hop, the lowest id among edges avoiding useless vertices."""
    if ctx is None or ctx.useless != frozenset(useless):
        ctx = HierarchyContext(g, p, useless)
    out = []
    for a, b in zip(hpath, hpath[1:]):
        eid = ctx.supporting_edge(a, b)
        if eid is None:
            raise GraphError(f"hop {a}-{b} has no edge avoiding useless vertices")
        out.append(eid)
    return out


@dataclass
class IterationTrace:
    groups: int
    b: list[int]
    diameters: list[int]
    purity: Fraction | None = None


@dataclass
class PairBook:
    """Everything the harvest produced, including a partial run."""

    pairs: list[tuple[int, int]] = field(default_factory=list)
    hpaths: list[tuple[int, ...]] = field(default_factory=list)
    supports: list[tuple[int, ...]] = field(default_factory=list)
    dists: list[int] = field(default_factory=list)
    useless: set[int] = field(default_factory=set)
    trace: list[IterationTrace] = field(default_factory=list)
    target: int = 0
    stop_reason: str = STOP_COMPLETE
    abort_iteration: int | None = None
    abort_b: list[int] | None = None

    @property
    def aborted(self) -> bool:
        return self.stop_reason in ABORTING

    @property
    def A(self) -> list[int]:
        return [a for a, _ in self.pairs]

    @property
    def B(self) -> list[int]:
        return [b for _, b in self.pairs]

    @property
    def bad_node_vector(self) -> list[int]:
        if self.abort_b is not None:
            return list(self.abort_b)
        return list(self.trace[-1].b) if self.trace else []

    def check(self) -> None:
        """Endpoint distinctness and supporting-set disjointness."""
        ends = [x for pair in self.pairs for x in pair]
        if len(set(ends)) != len(ends):
            raise AssertionError("pair endpoints are not distinct")
        used = [e for sup in self.supports for e in sup]
        if len(set(used)) != len(used):
            raise AssertionError("supporting edge sets overlap")
        for (a, b), sup, hp in zip(self.pairs, self.supports, self.hpaths):
            if len(sup) != len(hp) - 1:
                raise AssertionError("supporting set size differs from path length")


def harvest_pairs(g: CapacitatedGraph, p: Partition, params: ClusterParams, m: int) -> PairBook:
    """Up to ``m`` rounds of clustering, pair choice and useless-set growth.

    The run stops cleanly once the useless set outgrows its budget; a
    clustering failure or a missing pair ends it as an abort.
    """
    book = PairBook(target=m)
    singles = [(c,) for c in range(p.f)]
    for it in range(m):
        if len(book.useless) > params.useless_budget:
            book.stop_reason = STOP_USELESS
            break
        ctx = HierarchyContext(g, p, book.useless)
        try:
            state = run_hierarchy(g, p, book.useless, params, ctx)
        except ClusteringAborted as exc:
            book.stop_reason = STOP_BAD
            book.abort_iteration = it
            book.abort_b = exc.b
            log.info("clustering aborted in round %d: %s", it, exc)
            break
        # friendships shrink as vertices become useless, so rebuild every round
        h0_mat = ctx.friend_matrix(singles)
        diam = cluster_diameter_check(state, h0_mat)
        h0 = friend_lists(h0_mat)
        try:
            pair = find_typical_pair(g, p, state, h0)
        except NoTypicalPair as exc:
            book.trace.append(IterationTrace(len(state.family), state.b, diam))
            book.stop_reason = STOP_NO_PAIR
            book.abort_iteration = it
            log.info("no typical pair in round %d: %s", it, exc)
            break
        sup = supporting_edge_set(pair.hpath, g, p, book.useless, ctx)
        book.trace.append(IterationTrace(len(state.family), state.b, diam, pair.purity))
        book.pairs.append((pair.u, pair.v))
        book.hpaths.append(pair.hpath)
        book.supports.append(tuple(sup))
        book.dists.append(pair.dist)
        for eid in sup:
            e = g.edges[eid]
            book.useless.update((e.u, e.v))
        book.useless.update((pair.u, pair.v))
    return book


def _hpath_of_clusters(clusters: Sequence[int], h: ContractedGraph) -> HPath:
    edges = []
    for a, b in zip(clusters, clusters[1:]):
        sid = h.superedge(a, b)
        if sid is None:
            raise GraphError(f"no superedge between clusters {a} and {b}")
        edges.append(sid)
    return HPath(tuple(clusters), tuple(edges))


def _join(*parts: HPath) -> HPath:
    nodes: list[int] = []
    edges: list[int] = []
    for part in parts:
        if nodes:
            if nodes[-1] != part.nodes[0]:
                raise GraphError("path segments do not meet")
            nodes.extend(part.nodes[1:])
        else:
            nodes.extend(part.nodes)
        edges.extend(part.edges)
    return HPath(tuple(nodes), tuple(edges))


def _reverse(path: HPath) -> HPath:
    return HPath(tuple(reversed(path.nodes)), tuple(reversed(path.edges)))


@dataclass
class DemandAssembly:
    """Terminal demand in H with its explicit unit-path routing.

    ``terminal_pairs[i]`` is ``(a, b, t, t')`` for every pair whose endpoints
    were both routed; pairs with ``t == t'`` stay listed but add no demand.
    """

    demand: Demand
    routing: list[FlowPath]
    terminal_pairs: list[tuple[int, int, int, int]]
    route_a: TerminalRouting
    route_b: TerminalRouting
    self_pairs: int
    dropped: list[tuple[int, int]]
    family_load: dict[str, dict[int, int]]

    @property
    def partial(self) -> bool:
        return bool(self.dropped)


def assemble_demand(g: CapacitatedGraph, p: Partition, h: ContractedGraph, book: PairBook) -> DemandAssembly:
    route_a = route_to_terminals(g, book.A)
    route_b = route_to_terminals(g, book.B)
    counts: dict[tuple[int, int], int] = {}
    routing: list[FlowPath] = []
    rows: list[tuple[int, int, int, int]] = []
    dropped: list[tuple[int, int]] = []
    loads: dict[str, dict[int, int]] = {"pairs": {}, "a": {}, "b": {}}
    self_pairs = 0
    for (a, b), hp in zip(book.pairs, book.hpaths):
        if a not in route_a.paths or b not in route_b.paths:
            dropped.append((a, b))
            continue
        qa = _reverse(induce_path(route_a.paths[a], p, h))
        qb = induce_path(route_b.paths[b], p, h)
        q = _hpath_of_clusters(hp, h)
        t, t2 = route_a.terminal_of(a), route_b.terminal_of(b)
        rows.append((a, b, t, t2))
        if t == t2:
            self_pairs += 1
            continue
        for name, seg in (("a", qa), ("pairs", q), ("b", qb)):
            for sid in seg.edges:
                loads[name][sid] = loads[name].get(sid, 0) + 1
        walk = _join(qa, q, qb)
        # H nodes for terminals are their clusters, demand is keyed by G terminals
        routing.append(FlowPath(walk.nodes, walk.edges, Fraction(1)))
        key = (t, t2) if t < t2 else (t2, t)
        counts[key] = counts.get(key, 0) + 1
    if route_a.unrouted or route_b.unrouted:
        log.warning("unrouted endpoints: %d in A, %d in B", len(route_a.unrouted), len(route_b.unrouted))
    demand = Demand({key: Fraction(c) for key, c in counts.items()})
    return DemandAssembly(demand, routing, rows, route_a, route_b, self_pairs, dropped, loads)
