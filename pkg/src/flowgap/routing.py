"""Route vertex sets to terminals through an integral max-flow.

The auxiliary graph adds a super source joined to every terminal and a super
sink joined to every vertex of ``U`` by a unit edge. Any integral max-flow
then splits into one unit path per routed vertex, and capacity-respecting
sharing of the high-capacity tree edges is allowed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .graph import CapacitatedGraph, GraphError

BRUTE_CUT_LIMIT = 14


@dataclass(frozen=True)
class AuxGraph:
    """Undirected graph with a designated source and sink.

    Edges ``0..m-1`` mirror the original graph; the source edges follow, then
    the sink edges.
    """

    n: int
    edges: tuple[tuple[int, int, int], ...]
    source: int
    sink: int
    base_edges: int


def build_aux_graph(g: CapacitatedGraph, targets: Sequence[int]) -> AuxGraph:
    for u in targets:
        if not 0 <= u < g.n:
            raise GraphError(f"vertex {u} out of range")
    if len(set(targets)) != len(targets):
        raise GraphError("routing targets must be distinct")
    src, snk = g.n, g.n + 1
    big = len(targets) + 1
    edges = [(e.u, e.v, int(e.cap)) for e in g.edges]
    edges += [(src, t, big) for t in g.terminals]
    edges += [(u, snk, 1) for u in targets]
    return AuxGraph(g.n + 2, tuple(edges), src, snk, g.m)


class _Dinic:
    """Dinic's blocking-flow max-flow on an undirected integer network."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int, int]]):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.orig: list[int] = []
        for u, v, c in edges:
            # arc 2i: u->v, arc 2i+1: v->u, each with the full capacity
            self.head[u].append(len(self.to))
            self.to.append(v)
            self.cap.append(c)
            self.head[v].append(len(self.to))
            self.to.append(u)
            self.cap.append(c)
            self.orig.append(c)

    def _levels(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for a in self.head[x]:
                y = self.to[a]
                if self.cap[a] > 0 and level[y] < 0:
                    level[y] = level[x] + 1
                    queue.append(y)
        return level if level[t] >= 0 else None

    def _blocking(self, s: int, t: int, level: list[int]) -> int:
        ptr = [0] * self.n
        pushed_total = 0
        while True:
            # iterative DFS for one augmenting path in the level graph
            stack_nodes = [s]
            stack_arcs: list[int] = []
            while stack_nodes:
                x = stack_nodes[-1]
                if x == t:
                    break
                advanced = False
                heads = self.head[x]
                while ptr[x] < len(heads):
                    a = heads[ptr[x]]
                    y = self.to[a]
                    if self.cap[a] > 0 and level[y] == level[x] + 1:
                        stack_nodes.append(y)
                        stack_arcs.append(a)
                        advanced = True
                        break
                    ptr[x] += 1
                if not advanced:
                    stack_nodes.pop()
                    if stack_arcs:
                        prev = stack_arcs.pop()
                        ptr[self.to[prev ^ 1]] += 1
            if not stack_nodes:
                return pushed_total
            push = min(self.cap[a] for a in stack_arcs)
            for a in stack_arcs:
                self.cap[a] -= push
                self.cap[a ^ 1] += push
            pushed_total += push

    def run(self, s: int, t: int) -> int:
        flow = 0
        while (level := self._levels(s, t)) is not None:
            flow += self._blocking(s, t, level)
        return flow

    def net_flow(self, i: int) -> int:
        """Flow on undirected edge i in its u->v direction (negative = v->u)."""
        return self.orig[i] - self.cap[2 * i]

    def reachable(self, s: int) -> set[int]:
        seen = {s}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for a in self.head[x]:
                y = self.to[a]
                if self.cap[a] > 0 and y not in seen:
                    seen.add(y)
                    queue.append(y)
        return seen


def max_flow_value(aux: AuxGraph) -> int:
    return _Dinic(aux.n, aux.edges).run(aux.source, aux.sink)


def mincut_brute_oracle(aux: AuxGraph) -> int:
    """Minimum source/sink cut by enumerating every source side."""
    if aux.n > BRUTE_CUT_LIMIT:
        raise GraphError(f"brute-force cut needs at most {BRUTE_CUT_LIMIT} nodes")
    others = [x for x in range(aux.n) if x not in (aux.source, aux.sink)]
    best = None
    for size in range(len(others) + 1):
        for chosen in combinations(others, size):
            side = set(chosen)
            side.add(aux.source)
            value = sum(c for u, v, c in aux.edges if (u in side) != (v in side))
            if best is None or value < best:
                best = value
    return best


@dataclass
class TerminalRouting:
    """One unit path per routed vertex, each ending at a terminal.

    ``paths[u]`` is the vertex sequence ``u .. t`` and ``edge_paths[u]`` the
    matching edge ids. ``cut`` is the source side of a minimum cut when some
    vertices could not be routed.
    """

    paths: dict[int, tuple[int, ...]]
    edge_paths: dict[int, tuple[int, ...]]
    usage: dict[int, int]
    flow: int
    unrouted: tuple[int, ...] = ()
    cut: frozenset[int] | None = None
    cut_value: int | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.unrouted

    def terminal_of(self, u: int) -> int:
        return self.paths[u][-1]


def route_to_terminals(g: CapacitatedGraph, targets: Sequence[int]) -> TerminalRouting:
    """Connect every vertex of ``targets`` to some terminal by unit paths.

    Paths share an edge at most ``cap(e)`` times in total, so on unit
    capacity edges they are edge-disjoint.
    """
    targets = list(targets)
    aux = build_aux_graph(g, targets)
    solver = _Dinic(aux.n, aux.edges)
    flow = solver.run(aux.source, aux.sink)

    # residual flow on each aux edge, oriented; arcs listed per tail in edge-id order
    out_arcs: list[list[list[int]]] = [[] for _ in range(aux.n)]  # [edge_id, head, units]
    for i, (u, v, _) in enumerate(aux.edges):
        x = solver.net_flow(i)
        if x > 0:
            out_arcs[u].append([i, v, x])
        elif x < 0:
            out_arcs[v].append([i, u, -x])

    def advance(x: int) -> list[int] | None:
        for arc in out_arcs[x]:
            if arc[2] > 0:
                return arc
        return None

    paths: dict[int, tuple[int, ...]] = {}
    edge_paths: dict[int, tuple[int, ...]] = {}
    usage: dict[int, int] = {}
    cycles = 0
    for _ in range(flow):
        nodes = [aux.source]
        arcs: list[list[int]] = []
        pos = {aux.source: 0}
        while nodes[-1] != aux.sink:
            arc = advance(nodes[-1])
            if arc is None:
                raise RuntimeError("flow conservation violated during decomposition")
            y = arc[1]
            if y in pos:
                # cancel one unit around the cycle and resume from its start
                start = pos[y]
                for a in arcs[start:] + [arc]:
                    a[2] -= 1
                for z in nodes[start + 1:]:
                    del pos[z]
                del nodes[start + 1:]
                del arcs[start:]
                cycles += 1
                continue
            pos[y] = len(nodes)
            nodes.append(y)
            arcs.append(arc)
        for a in arcs:
            a[2] -= 1
        # nodes: source, terminal, ..., u, sink
        gnodes = tuple(reversed(nodes[1:-1]))
        gedges = tuple(a[0] for a in reversed(arcs[1:-1]))
        u = gnodes[0]
        paths[u] = gnodes
        edge_paths[u] = gedges
        for eid in gedges:
            usage[eid] = usage.get(eid, 0) + 1

    result = TerminalRouting(paths, edge_paths, usage, flow)
    if cycles:
        result.notes.append(f"cancelled {cycles} flow cycles during decomposition")
    if flow < len(targets):
        side = solver.reachable(aux.source)
        result.unrouted = tuple(u for u in targets if u not in paths)
        result.cut = frozenset(x for x in side if x < g.n)
        result.cut_value = sum(c for u, v, c in aux.edges if (u in side) != (v in side))
    return result
