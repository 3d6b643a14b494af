import random

import pytest

from flowgap.graph import CapacitatedGraph


def random_graph(rng: random.Random, n: int, density: float, max_cap: int = 1, terminals: int = 0):
    pairs = [
        (u, v, rng.randint(1, max_cap))
        for u in range(n)
        for v in range(u + 1, n)
        if rng.random() < density
    ]
    terms = rng.sample(range(n), terminals) if terminals else []
    return CapacitatedGraph.from_edges(n, pairs, terms)


@pytest.fixture
def rng():
    return random.Random(20261016)
