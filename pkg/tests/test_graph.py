import random
from collections import deque
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowgap.graph import (
    INF,
    CapacitatedGraph,
    Demand,
    Edge,
    GraphError,
    Partition,
    _bfs_python,
    bfs_distances,
    contract,
    induce_path,
    is_connected,
    total_capacity,
    validate_partition,
)

from conftest import random_graph


def test_rejects_self_loop_and_bad_ids():
    with pytest.raises(GraphError):
        CapacitatedGraph.from_edges(3, [(1, 1)])
    with pytest.raises(GraphError):
        CapacitatedGraph(3, (Edge(1, 0, 1, 1),))
    with pytest.raises(GraphError):
        CapacitatedGraph.from_edges(3, [(0, 5)])
    with pytest.raises(GraphError):
        CapacitatedGraph.from_edges(3, [(0, 1, -1)])
    with pytest.raises(GraphError):
        CapacitatedGraph.from_edges(3, [(0, 1)], terminals=[0, 0])


def test_parallel_edges_kept_apart():
    g = CapacitatedGraph.from_edges(2, [(0, 1), (0, 1), (1, 0)])
    assert g.m == 3
    assert g.degree(0) == 3
    assert [eid for _, eid in g.adjacency[0]] == [0, 1, 2]
    assert total_capacity(g) == 3


def test_bfs_path_and_unreachable():
    g = CapacitatedGraph.from_edges(5, [(0, 1), (1, 2), (2, 3)])
    assert bfs_distances(g, [0]) == [0, 1, 2, 3, INF]
    assert bfs_distances(g, [0, 3]) == [0, 1, 1, 0, INF]
    assert not is_connected(g)
    with pytest.raises(GraphError):
        bfs_distances(g, [])
    with pytest.raises(GraphError):
        bfs_distances(g, [9])


@pytest.mark.parametrize("seed", range(6))
def test_sparse_bfs_matches_queue_bfs(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 300, 0.01)
    sources = rng.sample(range(300), rng.randint(1, 4))
    assert bfs_distances(g, sources) == _bfs_python(g, sources)


def test_partition_dense_ids():
    with pytest.raises(GraphError):
        Partition((0, 2))
    p = Partition.from_labels([7, 3, 7, 9])
    assert p.assignment == (1, 0, 1, 2)
    assert p.f == 3
    assert p.clusters == [[1], [0, 2], [3]]


def test_validate_partition_reports_terminal_pair():
    g = CapacitatedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)], terminals=[0, 3])
    assert validate_partition(g, Partition((0, 0, 1, 1))) is None
    assert validate_partition(g, Partition((0, 1, 1, 0))) == (0, 3)


def test_contract_merges_parallel_crossings():
    g = CapacitatedGraph.from_edges(4, [(0, 2, 1), (1, 3, 2), (0, 1, 5), (2, 3, 1), (3, 0, 4)])
    h = contract(g, Partition((0, 0, 1, 1)))
    assert h.n == 2
    assert [(e.u, e.v, e.cap) for e in h.edges] == [(0, 1, 7)]
    assert h.backmap == ((0, 1, 4),)


def test_induce_path_collapses_repeats():
    g = CapacitatedGraph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    p = Partition((0, 0, 1, 1, 2, 2))
    h = contract(g, p)
    path = induce_path([0, 1, 2, 3, 4, 5], p, h)
    assert path.nodes == (0, 1, 2)
    assert path.edges == (h.superedge(0, 1), h.superedge(1, 2))
    with pytest.raises(GraphError):
        induce_path([0, 5], p, h)


def test_demand_normalizes_and_rejects():
    d = Demand({(3, 1): 1, (1, 3): Fraction(1, 2), (0, 2): 0})
    assert d.get(1, 3) == Fraction(3, 2)
    assert d.positive() == [((1, 3), Fraction(3, 2))]
    assert d.nodes() == [1, 3]
    with pytest.raises(GraphError):
        Demand({(2, 2): 1})
    with pytest.raises(GraphError):
        Demand({(0, 1): -1})
    assert (d + d).get(1, 3) == 3
    assert d.scaled(Fraction(2)).get(3, 1) == 3
    assert d.relabeled({1: 5, 3: 4}).get(4, 5) == Fraction(3, 2)


@st.composite
def graph_and_partition(draw):
    n = draw(st.integers(2, 12))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(1, 4)), max_size=30))
    pairs = [p for p in pairs if p[0] != p[1]]
    labels = draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    return CapacitatedGraph.from_edges(n, pairs), Partition.from_labels(labels)


@given(graph_and_partition())
@settings(max_examples=80, deadline=None)
def test_contraction_preserves_crossing_capacity(gp):
    g, p = gp
    h = contract(g, p)
    crossing = sum(e.cap for e in g.edges if p[e.u] != p[e.v])
    assert total_capacity(h) == crossing
    assert sorted(i for ids in h.backmap for i in ids) == sorted(e.id for e in g.edges if p[e.u] != p[e.v])
    for e in h.edges:
        assert e.u < e.v


@given(graph_and_partition())
@settings(max_examples=60, deadline=None)
def test_bfs_triangle_inequality(gp):
    g, _ = gp
    dist = bfs_distances(g, [0])
    for e in g.edges:
        if dist[e.u] != INF:
            assert dist[e.v] != INF and abs(dist[e.u] - dist[e.v]) <= 1
