import random
from fractions import Fraction

import pytest

from flowgap.clustering import ClusterParams, HierarchyContext, build_friendship_graph, run_hierarchy
from flowgap.demand import (
    STOP_COMPLETE,
    STOP_USELESS,
    NoTypicalPair,
    PairBook,
    assemble_demand,
    find_typical_pair,
    harvest_pairs,
    supporting_edge_set,
)
from flowgap.expander import ExpanderSpec, gen_matching_union
from flowgap.graph import INF, CapacitatedGraph, GraphError, Partition, bfs_distances, contract


def loose(n, **kw):
    base = dict(s=2.0, growth=1.2, levels=1, bad_fraction=1.0, useless_fraction=1.0)
    base.update(kw)
    return ClusterParams(n, **base)


def test_singleton_partition_picks_bfs_farthest():
    # 0 centers {0,1,2}; 3 is adopted through 1; 4 sees only 2 vertices and is dropped
    g = CapacitatedGraph.from_edges(5, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)])
    p = Partition.singletons(5)
    state = run_hierarchy(g, p, set(), loose(5))
    assert state.family == [(0, 1, 2, 3)] and state.b == [1]
    h0 = build_friendship_graph(g, p, set())
    pair = find_typical_pair(g, p, state, h0)
    assert (pair.u, pair.v, pair.dist) == (0, 3, 2)
    assert pair.hpath == (0, 1, 3)


@pytest.mark.parametrize("seed", range(10))
def test_pair_is_farthest_inside_group(seed):
    rng = random.Random(seed)
    n = rng.choice([40, 80, 120, 200])
    g = gen_matching_union(ExpanderSpec(n, 3, seed))
    p = Partition.from_labels([rng.randrange(n // 4) for _ in range(n)])
    useless = set(rng.sample(range(n), n // 10))
    state = run_hierarchy(g, p, useless, loose(n))
    h0 = HierarchyContext(g, p, useless).friendships([(c,) for c in range(p.f)])
    try:
        pair = find_typical_pair(g, p, state, h0)
    except NoTypicalPair:
        return
    grp = state.family[pair.group]
    live = sorted(v for c in grp for v in p.clusters[c] if v not in useless)
    assert pair.u == live[0] and pair.u not in useless and pair.v not in useless
    ecc = max(d for v, d in enumerate(bfs_distances(g, [pair.u])) if v in live and d != INF)
    assert pair.dist == ecc
    assert len(pair.hpath) - 1 <= 5 ** state.level


def test_supporting_edges_small_cases():
    g = CapacitatedGraph.from_edges(4, [(0, 1), (2, 3), (1, 2), (0, 3)])
    p = Partition.from_labels([0, 0, 1, 1])
    assert supporting_edge_set((0,), g, p, set()) == []
    assert supporting_edge_set((0, 1), g, p, set()) == [2]
    assert supporting_edge_set((1, 0), g, p, {1}) == [3]
    with pytest.raises(GraphError):
        supporting_edge_set((0, 1), g, p, {1, 3})


def instance(n=120, seed=0, k=6):
    g = gen_matching_union(ExpanderSpec(n, 6, seed)).with_terminals(range(k))
    rng = random.Random(seed)
    seeds = list(range(k)) + rng.sample(range(k, n), n // 8 - k)
    from flowgap.pipeline import _voronoi

    return g, _voronoi(g, seeds)


def test_harvest_single_round():
    g, p = instance()
    book = harvest_pairs(g, p, loose(g.n), m=1)
    assert len(book.pairs) == 1 and book.stop_reason == STOP_COMPLETE
    (a, b), sup = book.pairs[0], book.supports[0]
    assert book.useless == {a, b} | {x for e in sup for x in (g.edges[e].u, g.edges[e].v)}


@pytest.mark.parametrize("seed", range(6))
def test_harvest_invariants(seed):
    g, p = instance(seed=seed)
    params = loose(g.n, useless_fraction=0.3)
    m = 40
    book = harvest_pairs(g, p, params, m)
    book.check()
    assert len(book.pairs) <= m
    levels = params.levels
    assert len(book.useless) <= m * (5**levels + 2)
    if book.stop_reason == STOP_USELESS:
        assert len(book.useless) > params.useless_budget
    # every pair endpoint and supporting endpoint is useless afterwards
    for (a, b), sup in zip(book.pairs, book.supports):
        assert {a, b} <= book.useless
        assert all(g.edges[e].u in book.useless and g.edges[e].v in book.useless for e in sup)
    # the H-paths of the pairs never share a G edge
    h = contract(g, p)
    for sup, hp in zip(book.supports, book.hpaths):
        for eid, (x, y) in zip(sup, zip(hp, hp[1:])):
            assert {p[g.edges[eid].u], p[g.edges[eid].v]} == {x, y}


def test_endpoint_terminals_give_unit_demand():
    g = CapacitatedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)], terminals=[0, 3])
    p = Partition.singletons(4)
    h = contract(g, p)
    book = PairBook(pairs=[(0, 3)], hpaths=[(0, 1, 2, 3)], supports=[(0, 1, 2)], dists=[3])
    asm = assemble_demand(g, p, h, book)
    assert dict(asm.demand.items()) == {(0, 3): 1}
    assert asm.routing[0].nodes == (0, 1, 2, 3)
    assert asm.terminal_pairs == [(0, 3, 0, 3)]


def test_multiplicity_and_self_pairs():
    # terminals 0 and 5; pairs (1,4) and (2,3) both map to (0,5); (6,7) hangs off 0 only
    edges = [(0, 1), (0, 2), (1, 4), (2, 3), (4, 5), (3, 5), (0, 6), (0, 7), (6, 7)]
    g = CapacitatedGraph.from_edges(8, edges, terminals=[0, 5])
    p = Partition.singletons(8)
    h = contract(g, p)
    book = PairBook(
        pairs=[(1, 4), (2, 3), (6, 7)],
        hpaths=[(1, 4), (2, 3), (6, 7)],
        supports=[(2,), (3,), (8,)],
        dists=[1, 1, 1],
    )
    asm = assemble_demand(g, p, h, book)
    assert asm.demand.get(0, 5) == 2
    assert asm.self_pairs == 1
    assert len(asm.terminal_pairs) == 3
    assert len(asm.routing) == 2


@pytest.mark.parametrize("seed", range(5))
def test_superedge_load_per_family_within_capacity(seed):
    g, p = instance(seed=seed)
    book = harvest_pairs(g, p, loose(g.n, useless_fraction=0.3), 30)
    h = contract(g, p)
    asm = assemble_demand(g, p, h, book)
    for loads in asm.family_load.values():
        for sid, x in loads.items():
            assert x <= h.edges[sid].cap
    from flowgap.congestion import routing_congestion

    assert routing_congestion(h, asm.routing, asm.demand.relabeled(p.assignment)) <= 3


def test_unroutable_pair_is_dropped():
    # vertex 3 is cut off from the terminals
    g = CapacitatedGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)], terminals=[0])
    p = Partition.singletons(5)
    h = contract(g, p)
    book = PairBook(pairs=[(1, 3)], hpaths=[(1,)], supports=[()], dists=[0])
    asm = assemble_demand(g, p, h, book)
    assert asm.partial and asm.dropped == [(1, 3)]
    assert asm.demand.is_zero()
    assert asm.route_b.cut is not None
