import itertools
import random
from fractions import Fraction

import pytest

from flowgap.expander import (
    ExpanderSpec,
    conductance_brute,
    expansion_check,
    gen_matching_union,
    spectral_lower_bound,
)
from flowgap.graph import CapacitatedGraph, GraphError


def complete(n):
    return CapacitatedGraph.from_edges(n, list(itertools.combinations(range(n), 2)))


def cycle(n):
    return CapacitatedGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def subset_conductance(g, subset):
    # independent plain-loop reference
    s = set(subset)
    cut = sum(1 for e in g.edges if (e.u in s) != (e.v in s))
    vol = sum(g.degree(v) for v in s)
    return Fraction(cut, min(vol, 2 * g.m - vol))


def enumerate_conductance(g):
    return min(
        subset_conductance(g, sub)
        for size in range(1, g.n)
        for sub in itertools.combinations(range(g.n), size)
    )


def test_spec_validation():
    with pytest.raises(GraphError):
        ExpanderSpec(7)
    with pytest.raises(GraphError):
        ExpanderSpec(8, d=0)


@pytest.mark.parametrize("n, d", [(2, 1), (10, 3), (64, 10)])
def test_matching_union_is_regular(n, d):
    g = gen_matching_union(ExpanderSpec(n, d, seed=3))
    assert g.m == n * d // 2
    assert all(g.degree(v) == d for v in range(n))


def test_generation_is_deterministic():
    a = gen_matching_union(ExpanderSpec(100, 10, 5))
    b = gen_matching_union(ExpanderSpec(100, 10, 5))
    c = gen_matching_union(ExpanderSpec(100, 10, 6))
    assert a == b and a != c


def test_known_conductances():
    assert conductance_brute(complete(4)) == Fraction(2, 3)
    assert conductance_brute(cycle(4)) == Fraction(1, 2)
    assert conductance_brute(cycle(8)) == Fraction(1, 4)
    two = CapacitatedGraph.from_edges(4, [(0, 1), (2, 3)])
    assert conductance_brute(two) == 0


@pytest.mark.parametrize("seed", range(8))
def test_brute_conductance_matches_enumeration(seed):
    g = gen_matching_union(ExpanderSpec(10, 4, seed))
    assert conductance_brute(g) == enumerate_conductance(g)


def test_brute_size_guard():
    with pytest.raises(GraphError):
        conductance_brute(cycle(22))


@pytest.mark.parametrize("seed", range(10))
def test_spectral_bound_below_brute_force(seed):
    n = random.Random(seed).choice([8, 12, 16])
    g = gen_matching_union(ExpanderSpec(n, 10, seed))
    assert spectral_lower_bound(g) <= float(conductance_brute(g)) + 1e-6


def test_spectral_on_known_graphs():
    # normalized Laplacian of K_n has lambda_2 = n/(n-1)
    assert spectral_lower_bound(complete(5)) == pytest.approx(5 / 8, abs=1e-9)
    with pytest.raises(GraphError):
        spectral_lower_bound(CapacitatedGraph.from_edges(4, [(0, 1), (2, 3)]))


def test_sparse_and_dense_spectra_agree():
    g = gen_matching_union(ExpanderSpec(80, 10, 1))
    from flowgap.expander import normalized_laplacian
    import numpy as np

    dense = np.linalg.eigvalsh(normalized_laplacian(g).toarray())[1] / 2
    assert spectral_lower_bound(g) == pytest.approx(dense, abs=1e-6)


def test_expansion_exhaustive_on_cycle():
    rep = expansion_check(cycle(8))
    assert rep.exhaustive
    assert rep.ratio == Fraction(2, 4)
    assert len(rep.witness) == 4


def test_expansion_sampled_is_an_upper_bound():
    g = gen_matching_union(ExpanderSpec(40, 10, 2))
    rep = expansion_check(g, trials=50, seed=1)
    assert not rep.exhaustive
    nbrs = {y for x in rep.witness for y, _ in g.adjacency[x]} - set(rep.witness)
    assert rep.ratio == Fraction(len(nbrs), len(rep.witness))
