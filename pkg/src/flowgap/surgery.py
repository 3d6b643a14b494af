"""Terminal choice, BFS layers around the terminals, and the capacity tree.

The tree gives every vertex of the terminal ball one edge toward the
terminals and pushes the count of boundary edges inward level by level, so
each level carries the same total weight.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field

from .graph import INF, CapacitatedGraph, GraphError, bfs_distances

log = logging.getLogger(__name__)

LOG2_5 = math.log2(5)


def alpha_of(eps: float) -> float:
    return LOG2_5 / (LOG2_5 + 1 - eps)


def beta_of(eps: float) -> float:
    return (LOG2_5 - 0.5 * eps) / (LOG2_5 + 1 - eps)


@dataclass(frozen=True)
class InstanceParams:
    """Size parameters of a hard instance.

    ``k`` and ``m`` default to the asymptotic formulas, clamped so that small
    graphs still give a usable instance; every clamp is listed in ``notes``.
    """

    n: int
    d: int = 10
    eps: float = 0.2
    k: int | None = None
    m: int | None = None
    seed: int = 0
    sample_terminals: bool = False
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not 0 < self.eps < 1:
            raise GraphError(f"epsilon must lie in (0, 1), got {self.eps}")
        if self.n < 2:
            raise GraphError("need at least two vertices")
        notes = list(self.notes)
        given = len(notes)
        log_n = math.log2(self.n)
        if self.k is None:
            k = math.floor(self.n / 2 ** (log_n ** self.alpha))
            if k < 2:
                notes.append(f"k formula gave {k}; clamped to 2")
                k = 2
            object.__setattr__(self, "k", k)
        if self.m is None:
            m = math.floor(10 * self.n / log_n ** self.alpha)
            if m < 1:
                notes.append(f"m formula gave {m}; clamped to 1")
                m = 1
            cap = max(1, self.n // 4)
            if m > cap:
                notes.append(f"m formula gave {m}; clamped to n/4 = {cap}")
                m = cap
            object.__setattr__(self, "m", m)
        if not 2 <= self.k <= self.n:
            raise GraphError(f"terminal count k={self.k} outside [2, n]")
        if self.m < 1:
            raise GraphError("pair budget m must be >= 1")
        object.__setattr__(self, "notes", tuple(notes))
        for note in notes[given:]:
            log.warning(note)

    @property
    def alpha(self) -> float:
        return alpha_of(self.eps)

    @property
    def beta(self) -> float:
        return beta_of(self.eps)


def pick_terminals(g: CapacitatedGraph, params: InstanceParams) -> CapacitatedGraph:
    """Lowest ids ``0..k-1`` by default, or a seeded sample without replacement."""
    k = params.k
    if k > g.n:
        raise GraphError(f"k={k} exceeds n={g.n}")
    if params.sample_terminals:
        terms = sorted(random.Random(params.seed).sample(range(g.n), k))
    else:
        terms = list(range(k))
    return g.with_terminals(terms)


@dataclass(frozen=True)
class LayerDecomposition:
    dist: tuple[int, ...]
    layers: tuple[tuple[int, ...], ...]
    r: int
    degenerate: bool

    def ball(self, i: int) -> list[int]:
        return [v for lay in self.layers[: i + 1] for v in lay]

    def ball_size(self, i: int) -> int:
        return sum(len(lay) for lay in self.layers[: i + 1])


def layer_decomposition(g: CapacitatedGraph, m: int) -> LayerDecomposition:
    """Exact BFS layers by distance to the nearest terminal.

    ``r`` is one less than the first index whose ball holds ``2m`` vertices,
    clamped at 0; if no ball is that large ``r`` is the last layer index.
    """
    if not g.terminals:
        raise GraphError("layer decomposition needs terminals")
    dist = bfs_distances(g, g.terminals)
    depth = max(dist)
    layers: list[list[int]] = [[] for _ in range(depth + 1)]
    for v, dv in enumerate(dist):
        if dv != INF:
            layers[dv].append(v)
    size = 0
    first = None
    for i, lay in enumerate(layers):
        size += len(lay)
        if size >= 2 * m:
            first = i
            break
    r = depth if first is None else max(first - 1, 0)
    degenerate = r == 0
    if degenerate:
        log.warning("ball B_0 already reaches 2m = %d vertices; capacity tree is empty", 2 * m)
    return LayerDecomposition(tuple(dist), tuple(tuple(x) for x in layers), r, degenerate)


@dataclass(frozen=True)
class CapacityTree:
    """Parent edges of the terminal ball with inward-propagated weights.

    ``parent[v]`` is the edge id toward layer ``dist[v]-1`` (or -1),
    ``weight`` maps tree edge id -> c', ``levels[i-1]`` lists the tree edges
    owned by layer ``i`` and ``boundary`` the edges from layer r to r+1.
    """

    parent: tuple[int, ...]
    weight: dict[int, int]
    levels: tuple[tuple[int, ...], ...]
    boundary: tuple[int, ...]
    r: int

    def level_weight(self, i: int) -> int:
        return sum(self.weight[e] for e in self.levels[i - 1])

    @property
    def total_weight(self) -> int:
        return sum(self.weight.values())


def build_capacity_tree(g: CapacitatedGraph, layers: LayerDecomposition) -> CapacityTree:
    r = layers.r
    dist = layers.dist
    parent = [-1] * g.n
    if r < 1:
        return CapacityTree(tuple(parent), {}, (), (), r)
    adj = g.adjacency
    for i in range(1, r + 1):
        for u in layers.layers[i]:
            # adjacency is sorted by (neighbor, edge id): first hit is the lowest-id neighbor
            for y, eid in adj[u]:
                if dist[y] == i - 1:
                    parent[u] = eid
                    break
    boundary = tuple(
        e.id for e in g.edges if {dist[e.u], dist[e.v]} == {r, r + 1}
    )
    weight: dict[int, int] = {}
    # child weight collected per vertex: E_u for the vertex at the upper end
    inward = [0] * g.n
    for eid in boundary:
        e = g.edges[eid]
        inward[e.u if dist[e.u] == r else e.v] += 1
    levels: list[tuple[int, ...]] = [()] * r
    for i in range(r, 0, -1):
        owned = []
        for u in layers.layers[i]:
            eid = parent[u]
            weight[eid] = inward[u]
            owned.append(eid)
            inward[g.edges[eid].other(u)] += inward[u]
        levels[i - 1] = tuple(owned)
    return CapacityTree(tuple(parent), weight, tuple(levels), boundary, r)


def assign_capacities(g: CapacitatedGraph, tree: CapacityTree) -> CapacitatedGraph:
    """Tree edges get ``max(c', 1)``, every other edge gets 1."""
    caps = [max(tree.weight[e.id], 1) if e.id in tree.weight else 1 for e in g.edges]
    return g.with_capacities(caps)


def check_telescoping(tree: CapacityTree) -> bool:
    r = tree.r
    if r < 1:
        return True
    if any(tree.level_weight(i) != tree.level_weight(i + 1) for i in range(1, r)):
        return False
    return tree.level_weight(r) == len(tree.boundary)
