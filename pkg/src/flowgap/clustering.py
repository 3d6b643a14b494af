"""Hierarchical clustering of a partition by friendship.

Two clusters are friends when an edge joins their non-useless parts. At
each level every good cluster (friends hold more than the next size
threshold) is either the center of a new group made of all its friends, or
is adopted by the group of its lowest-id friend that a center claimed.
Whatever stays unclaimed is discarded for that level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from .graph import CapacitatedGraph, Partition
from .surgery import beta_of


@dataclass(frozen=True)
class ClusterParams:
    """Size thresholds, level count and budgets of the hierarchy.

    ``s``, ``growth`` (the per-level exponent ``2 - lambda``) and ``levels``
    default to their asymptotic formulas in ``n`` and ``eps``; any of them can
    be overridden, which at desk scale is usually necessary.
    """

    n: int
    eps: float = 0.2
    s: float | None = None
    growth: float | None = None
    levels: int | None = None
    useless_fraction: float = 1 / 200
    bad_fraction: float = 0.96
    bad0_fraction: float = 0.24
    purity: float = 7 / 8

    def __post_init__(self) -> None:
        log_n = math.log2(max(self.n, 2))
        if self.s is None:
            object.__setattr__(self, "s", max(2.0, 2 ** (log_n ** beta_of(self.eps))))
        if self.growth is None:
            object.__setattr__(self, "growth", 2 ** (1 - self.eps / 2))
        if self.levels is None:
            loglog = math.log2(log_n) if log_n > 1 else 0.0
            raw = math.floor(((1 - beta_of(self.eps)) * loglog - 7) / (1 - self.eps / 2))
            object.__setattr__(self, "levels", max(1, raw))
        if self.s < 2:
            raise ValueError(f"size threshold s must be >= 2, got {self.s}")
        if self.growth <= 1:
            raise ValueError("growth exponent must exceed 1 so thresholds increase")
        if self.levels < 1:
            raise ValueError("need at least one level")

    def threshold(self, i: int) -> float:
        """``s_i = s ** (growth ** i)``; overflow saturates to infinity."""
        try:
            return self.s ** (self.growth ** i)
        except OverflowError:
            return math.inf

    @property
    def useless_budget(self) -> float:
        return self.n * self.useless_fraction

    @property
    def bad_budget(self) -> float:
        return self.n * self.bad_fraction

    @property
    def bad0_budget(self) -> float:
        return self.n * self.bad0_fraction

    def describe(self) -> dict:
        return {
            "s": self.s,
            "growth": self.growth,
            "levels": self.levels,
            "useless_fraction": self.useless_fraction,
            "bad_fraction": self.bad_fraction,
        }


class HierarchyContext:
    """Graph, partition and useless set, pre-digested into numpy arrays."""

    def __init__(self, g: CapacitatedGraph, p: Partition, useless: Iterable[int] = ()):
        self.g = g
        self.p = p
        self.useless = frozenset(useless)
        self.part = np.asarray(p.assignment, dtype=np.int64)
        self.cluster_size = np.bincount(self.part, minlength=p.f)
        eu, ev = g.endpoints
        live = np.ones(g.n, dtype=bool)
        if self.useless:
            live[list(self.useless)] = False
        self.live = live
        self.live_size = np.bincount(self.part[live], minlength=p.f)
        keep = live[eu] & live[ev]
        cu, cv = self.part[eu], self.part[ev]
        keep &= cu != cv
        # ids of the surviving crossing edges, with cluster endpoints ordered
        self.edge_ids = np.nonzero(keep)[0]
        a, b = cu[keep], cv[keep]
        self.lo = np.minimum(a, b)
        self.hi = np.maximum(a, b)
        self.eu, self.ev = eu, ev

    def friend_matrix(self, family: Sequence[Sequence[int]]) -> scipy.sparse.csr_matrix:
        """Symmetric 0/1 friendship matrix over ``family``, no diagonal."""
        count = len(family)
        gid = np.full(self.p.f, -1, dtype=np.int64)
        for idx, grp in enumerate(family):
            gid[list(grp)] = idx
        ga, gb = gid[self.lo], gid[self.hi]
        ok = (ga >= 0) & (gb >= 0) & (ga != gb)
        size = max(count, 1)
        keys = np.unique(np.minimum(ga[ok], gb[ok]) * size + np.maximum(ga[ok], gb[ok]))
        x, y = keys // size, keys % size
        data = np.ones(2 * keys.size, dtype=np.int8)
        return scipy.sparse.csr_matrix(
            (data, (np.concatenate([x, y]), np.concatenate([y, x]))), shape=(count, count)
        )

    def friendships(self, family: Sequence[Sequence[int]]) -> list[list[int]]:
        """Friend lists over ``family`` (groups of base clusters), self included."""
        return friend_lists(self.friend_matrix(family))

    def sizes(self, family: Sequence[Sequence[int]]) -> list[int]:
        cs = self.cluster_size
        return [int(cs[list(grp)].sum()) for grp in family]


    def supporting_edge(self, a: int, b: int) -> int | None:
        """Lowest id edge joining the non-useless parts of clusters a and b."""
        lo, hi = (a, b) if a < b else (b, a)
        hit = np.nonzero((self.lo == lo) & (self.hi == hi))[0]
        return int(self.edge_ids[hit[0]]) if hit.size else None


def friend_lists(mat: scipy.sparse.csr_matrix) -> list[list[int]]:
    mat = mat.tocsr()
    mat.sort_indices()
    out = []
    for x in range(mat.shape[0]):
        row = mat.indices[mat.indptr[x] : mat.indptr[x + 1]].tolist()
        row.append(x)
        row.sort()
        out.append(row)
    return out


def build_friendship_graph(
    g: CapacitatedGraph,
    p: Partition,
    useless: Iterable[int],
    clusters: Sequence[Sequence[int]] | None = None,
) -> list[list[int]]:
    ctx = HierarchyContext(g, p, useless)
    family = clusters if clusters is not None else [(c,) for c in range(p.f)]
    return ctx.friendships(family)


@dataclass
class ClusteringState:
    """Result of the hierarchy after ``level`` rounds.

    ``family`` lists the current groups as sorted tuples of base cluster ids,
    ``history[i]`` is the family at level ``i`` (``history[0]`` the
    singletons), ``discarded[i]`` the base clusters dropped at level ``i``
    and ``b[i]`` their vertex count.
    """

    level: int
    family: list[tuple[int, ...]]
    history: list[list[tuple[int, ...]]]
    discarded: list[list[int]] = field(default_factory=list)
    b: list[int] = field(default_factory=list)
    good: list[list[bool]] = field(default_factory=list)
    useless: frozenset[int] = frozenset()

    @property
    def bad_total(self) -> int:
        return sum(self.b)


class ClusteringAborted(RuntimeError):
    def __init__(self, level: int, b: list[int], budget: float, state: ClusteringState):
        super().__init__(f"bad vertices {sum(b)} exceed budget {budget:g} at level {level}")
        self.level = level
        self.b = list(b)
        self.state = state


def initial_state(p: Partition, useless: Iterable[int] = ()) -> ClusteringState:
    fam = [(c,) for c in range(p.f)]
    return ClusteringState(0, fam, [fam], useless=frozenset(useless))


def classify_level(
    ctx: HierarchyContext, family: Sequence[Sequence[int]], level: int, params: ClusterParams
) -> tuple[list[bool], list[list[int]]]:
    """Good flags per group: friends' total size strictly above ``s_{level+1}``."""
    mat = ctx.friend_matrix(family)
    sizes = np.asarray(ctx.sizes(family), dtype=np.int64)
    reach = mat.astype(np.int64) @ sizes + sizes
    bar = params.threshold(level + 1)
    good = [bool(x > bar) for x in reach]
    return good, friend_lists(mat)


def cluster_level(state: ClusteringState, ctx: HierarchyContext, params: ClusterParams) -> ClusteringState:
    """One round of greedy center selection, adoption and discarding."""
    level = state.level
    if level >= params.levels:
        raise ValueError(f"already at the last level {params.levels}")
    family = state.family
    good, friends = classify_level(ctx, family, level, params)
    count = len(family)
    claimed = [-1] * count  # group index for clusters marked by a center
    groups: list[list[int]] = []
    for x in range(count):
        if not good[x] or claimed[x] >= 0:
            continue
        if all(claimed[y] < 0 for y in friends[x]):
            for y in friends[x]:
                claimed[y] = len(groups)
            groups.append(list(friends[x]))
    adopted = [-1] * count
    for x in range(count):
        if good[x] and claimed[x] < 0:
            # only center-claimed friends count, so adoptees never chain
            host = next(y for y in friends[x] if claimed[y] >= 0)
            adopted[x] = claimed[host]
            groups[claimed[host]].append(x)
    dropped = [x for x in range(count) if claimed[x] < 0 and adopted[x] < 0]
    new_family = [tuple(sorted(c for x in grp for c in family[x])) for grp in groups]
    gone = sorted(c for x in dropped for c in family[x])
    b_i = int(ctx.cluster_size[gone].sum()) if gone else 0
    return ClusteringState(
        level + 1,
        new_family,
        state.history + [new_family],
        state.discarded + [gone],
        state.b + [b_i],
        state.good + [good],
        state.useless,
    )


def run_hierarchy(
    g: CapacitatedGraph,
    p: Partition,
    useless: Iterable[int],
    params: ClusterParams,
    ctx: HierarchyContext | None = None,
) -> ClusteringState:
    """All ``levels`` rounds; raises :class:`ClusteringAborted` over the bad budget."""
    ctx = ctx or HierarchyContext(g, p, useless)
    state = initial_state(p, ctx.useless)
    for _ in range(params.levels):
        state = cluster_level(state, ctx, params)
        if state.bad_total > params.bad_budget:
            raise ClusteringAborted(state.level, state.b, params.bad_budget, state)
    return state


class DiameterViolation(AssertionError):
    def __init__(self, level: int, pair: tuple[int, int], dist: float):
        super().__init__(f"level-{level} group has clusters {pair} at distance {dist} > {5 ** level - 1}")
        self.level = level
        self.pair = pair
        self.dist = dist


def cluster_diameter_check(
    state: ClusteringState, h0: Sequence[Sequence[int]] | scipy.sparse.spmatrix
) -> list[int]:
    """Largest internal level-0 friendship distance per level; enforces ``<= 5^i - 1``.

    Distances are measured inside the subgraph induced by each group, which
    is at least the distance in the whole friendship graph.
    """
    if scipy.sparse.issparse(h0):
        adj = h0.tocsr().astype(np.float64)
        adj.setdiag(0)
        adj.eliminate_zeros()
    else:
        rows, cols = [], []
        for x, row in enumerate(h0):
            for y in row:
                if y != x:
                    rows.append(x)
                    cols.append(y)
        f = len(h0)
        adj = scipy.sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(f, f))
    worst = []
    for level in range(1, state.level + 1):
        level_worst = 0
        for grp in state.history[level]:
            if len(grp) == 1:
                continue
            idx = np.asarray(grp)
            far, pair = _diameter(adj[idx][:, idx].toarray() > 0, 5**level - 1)
            if pair is not None:
                raise DiameterViolation(level, (int(grp[pair[0]]), int(grp[pair[1]])), far)
            level_worst = max(level_worst, far)
        worst.append(level_worst)
    return worst


def _diameter(adj: np.ndarray, bound: int) -> tuple[float, tuple[int, int] | None]:
    """Diameter by repeated boolean reachability; a witness pair if it exceeds ``bound``."""
    size = adj.shape[0]
    a = adj.astype(np.float32)
    reach = np.eye(size, dtype=bool)
    steps = 0
    while not reach.all():
        nxt = reach | ((reach.astype(np.float32) @ a) > 0)
        if steps == bound or (nxt == reach).all():
            i, j = np.argwhere(~reach)[0]
            far = math.inf if (nxt == reach).all() else steps + 1
            return far, (int(i), int(j))
        reach = nxt
        steps += 1
    return steps, None
