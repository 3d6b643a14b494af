"""Capacitated multigraphs, partitions, contraction and unit-length BFS."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse

#: Marker returned by BFS for unreachable vertices.
INF = -1

SCIPY_BFS_MIN = 256


class GraphError(ValueError):
    """Raised when a graph, partition or demand violates its invariants."""


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    cap: int | Fraction

    def other(self, x: int) -> int:
        return self.v if x == self.u else self.u


@dataclass(frozen=True)
class CapacitatedGraph:
    """Undirected multigraph on vertices ``0..n-1`` with edge ids ``0..m-1``.

    Parallel edges are allowed and told apart by id; self-loops are not.
    """

    n: int
    edges: tuple[Edge, ...]
    terminals: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 0:
            raise GraphError("negative vertex count")
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise GraphError(f"edge ids must be dense and ordered, got {e.id} at {i}")
            if not (0 <= e.u < self.n and 0 <= e.v < self.n):
                raise GraphError(f"edge {e.id} has endpoint out of range")
            if e.u == e.v:
                raise GraphError(f"edge {e.id} is a self-loop at {e.u}")
            if e.cap < 0:
                raise GraphError(f"edge {e.id} has negative capacity")
        if len(set(self.terminals)) != len(self.terminals):
            raise GraphError("duplicate terminal")
        for t in self.terminals:
            if not 0 <= t < self.n:
                raise GraphError(f"terminal {t} out of range")

    @classmethod
    def from_edges(
        cls,
        n: int,
        pairs: Iterable[tuple[int, int] | tuple[int, int, int]],
        terminals: Iterable[int] = (),
    ) -> CapacitatedGraph:
        """Build from ``(u, v)`` or ``(u, v, cap)`` tuples; missing caps are 1."""
        edges = []
        for i, p in enumerate(pairs):
            cap = p[2] if len(p) > 2 else 1
            edges.append(Edge(i, p[0], p[1], cap))
        return cls(n, tuple(edges), tuple(terminals))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def k(self) -> int:
        return len(self.terminals)

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per vertex, ``(neighbor, edge_id)`` sorted by neighbor then edge id."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for e in self.edges:
            adj[e.u].append((e.v, e.id))
            adj[e.v].append((e.u, e.id))
        for row in adj:
            row.sort()
        return adj

    @cached_property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge endpoint arrays ``(u, v)`` indexed by edge id."""
        rows = np.fromiter((e.u for e in self.edges), dtype=np.int64, count=len(self.edges))
        cols = np.fromiter((e.v for e in self.edges), dtype=np.int64, count=len(self.edges))
        return rows, cols

    @cached_property
    def unit_csr(self) -> scipy.sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix, parallel edges collapsed."""
        rows, cols = self.endpoints
        data = np.ones(2 * len(rows))
        mat = scipy.sparse.csr_matrix(
            (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(self.n, self.n)
        )
        mat.data[:] = 1.0
        return mat

    @cached_property
    def terminal_set(self) -> frozenset[int]:
        return frozenset(self.terminals)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def with_terminals(self, terminals: Iterable[int]) -> CapacitatedGraph:
        return CapacitatedGraph(self.n, self.edges, tuple(terminals))

    def with_capacities(self, caps: Sequence[int]) -> CapacitatedGraph:
        if len(caps) != self.m:
            raise GraphError("capacity vector length mismatch")
        edges = tuple(Edge(e.id, e.u, e.v, c) for e, c in zip(self.edges, caps))
        return CapacitatedGraph(self.n, edges, self.terminals)


def total_capacity(g: CapacitatedGraph) -> int | Fraction:
    """Exact sum of edge capacities, ``c(E)``."""
    return sum((e.cap for e in g.edges), 0)


def bfs_distances(g: CapacitatedGraph, sources: Iterable[int]) -> list[int]:
    """Multi-source hop distances; unreachable vertices get :data:`INF`.

    Large graphs go through scipy's csgraph; small ones use a plain queue.
    """
    sources = list(sources)
    if g.n >= SCIPY_BFS_MIN and isinstance(g, CapacitatedGraph) and sources:
        for s in sources:
            if not 0 <= s < g.n:
                raise GraphError(f"source {s} out of range")
        # level-synchronous frontier expansion, one sparse product per layer
        adj = g.unit_csr
        dist = np.full(g.n, INF, dtype=np.int64)
        frontier = np.zeros(g.n, dtype=bool)
        frontier[sources] = True
        dist[frontier] = 0
        level = 0
        while frontier.any():
            level += 1
            frontier = (adj @ frontier.astype(np.float64) > 0) & (dist == INF)
            dist[frontier] = level
        return dist.tolist()
    return _bfs_python(g, sources)


def _bfs_python(g, sources: list[int]) -> list[int]:
    dist = [INF] * g.n
    queue: deque[int] = deque()
    for s in sources:
        if not 0 <= s < g.n:
            raise GraphError(f"source {s} out of range")
        if dist[s] == INF:
            dist[s] = 0
            queue.append(s)
    if not queue:
        raise GraphError("bfs needs at least one source")
    adj = g.adjacency
    while queue:
        x = queue.popleft()
        dx = dist[x] + 1
        for y, _ in adj[x]:
            if dist[y] == INF:
                dist[y] = dx
                queue.append(y)
    return dist


def is_connected(g: CapacitatedGraph) -> bool:
    if g.n == 0:
        return True
    return INF not in bfs_distances(g, [0])


@dataclass(frozen=True)
class Partition:
    """Vertex -> cluster assignment with dense cluster ids ``0..f-1``."""

    assignment: tuple[int, ...]

    def __post_init__(self) -> None:
        used = set(self.assignment)
        if used != set(range(len(used))):
            raise GraphError("cluster ids must be 0..f-1 without gaps")

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> Partition:
        """Compact arbitrary labels to dense ids, preserving label order."""
        order = {lab: i for i, lab in enumerate(sorted(set(labels)))}
        return cls(tuple(order[lab] for lab in labels))

    @classmethod
    def singletons(cls, n: int) -> Partition:
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.assignment)

    @cached_property
    def f(self) -> int:
        return max(self.assignment) + 1 if self.assignment else 0

    @cached_property
    def clusters(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.f)]
        for v, c in enumerate(self.assignment):
            out[c].append(v)
        return out

    def __getitem__(self, v: int) -> int:
        return self.assignment[v]


def validate_partition(g: CapacitatedGraph, p: Partition) -> tuple[int, int] | None:
    """Return the first terminal pair sharing a cluster, or None if valid."""
    if p.n != g.n:
        raise GraphError("partition size mismatch")
    seen: dict[int, int] = {}
    for t in g.terminals:
        c = p[t]
        if c in seen:
            return (seen[c], t)
        seen[c] = t
    return None


@dataclass(frozen=True)
class ContractedGraph:
    """Graph of supernodes; parallel crossing edges merge into one superedge."""

    n: int
    edges: tuple[Edge, ...]
    backmap: tuple[tuple[int, ...], ...]
    terminals: tuple[int, ...]

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(e.u, e.v): e.id for e in self.edges}

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for e in self.edges:
            adj[e.u].append((e.v, e.id))
            adj[e.v].append((e.u, e.id))
        for row in adj:
            row.sort()
        return adj

    @property
    def m(self) -> int:
        return len(self.edges)

    def superedge(self, a: int, b: int) -> int | None:
        return self.edge_index.get((a, b) if a < b else (b, a))


def contract(g: CapacitatedGraph, p: Partition) -> ContractedGraph:
    if p.n != g.n:
        raise GraphError("partition size mismatch")
    groups: dict[tuple[int, int], list[int]] = {}
    for e in g.edges:
        a, b = p[e.u], p[e.v]
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        groups.setdefault(key, []).append(e.id)
    edges = []
    backmap = []
    for sid, key in enumerate(sorted(groups)):
        ids = groups[key]
        edges.append(Edge(sid, key[0], key[1], sum(g.edges[i].cap for i in ids)))
        backmap.append(tuple(ids))
    terms = tuple(p[t] for t in g.terminals)
    return ContractedGraph(p.f, tuple(edges), tuple(backmap), terms)


@dataclass(frozen=True)
class HPath:
    nodes: tuple[int, ...]
    edges: tuple[int, ...]


def induce_path(gpath: Sequence[int], p: Partition, h: ContractedGraph) -> HPath:
    """Map a walk in G through the partition, collapsing repeated clusters."""
    nodes: list[int] = []
    edges: list[int] = []
    for v in gpath:
        c = p[v]
        if nodes and nodes[-1] == c:
            continue
        if nodes:
            sid = h.superedge(nodes[-1], c)
            if sid is None:
                raise GraphError(f"no superedge between {nodes[-1]} and {c}")
            edges.append(sid)
        nodes.append(c)
    return HPath(tuple(nodes), tuple(edges))


def _pair(t: int, u: int) -> tuple[int, int]:
    return (t, u) if t < u else (u, t)


@dataclass(frozen=True)
class Demand:
    """Nonnegative rational weights on unordered node pairs, keyed ``(lo, hi)``.

    Zero weights are dropped on construction.
    """

    entries: Mapping[tuple[int, int], Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[tuple[int, int], Fraction] = {}
        for (a, b), val in self.entries.items():
            if a == b:
                raise GraphError(f"self-pair ({a}, {a}) in demand")
            val = Fraction(val)
            if val < 0:
                raise GraphError("negative demand")
            key = _pair(a, b)
            clean[key] = clean.get(key, Fraction(0)) + val
        object.__setattr__(self, "entries", dict(sorted((k, v) for k, v in clean.items() if v)))

    def items(self):
        return self.entries.items()

    def positive(self) -> list[tuple[tuple[int, int], Fraction]]:
        return [(k, v) for k, v in self.entries.items() if v > 0]

    def is_zero(self) -> bool:
        return not self.positive()

    def get(self, a: int, b: int) -> Fraction:
        return self.entries.get(_pair(a, b), Fraction(0))

    def scaled(self, factor: Fraction) -> Demand:
        return Demand({k: v * factor for k, v in self.entries.items()})

    def relabeled(self, mapping: Mapping[int, int] | Sequence[int]) -> Demand:
        return Demand({(mapping[a], mapping[b]): v for (a, b), v in self.entries.items()})

    def __add__(self, other: Demand) -> Demand:
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, Fraction(0)) + v
        return Demand(out)

    def nodes(self) -> list[int]:
        return sorted({x for k, v in self.entries.items() if v > 0 for x in k})


@dataclass(frozen=True)
class FlowPath:
    nodes: tuple[int, ...]
    edges: tuple[int, ...]
    value: Fraction

    @property
    def commodity(self) -> tuple[int, int]:
        return _pair(self.nodes[0], self.nodes[-1])


PathFlow = list[FlowPath]
