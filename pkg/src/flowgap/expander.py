"""Random unions of perfect matchings and their expansion diagnostics."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .graph import CapacitatedGraph, GraphError, bfs_distances, is_connected

BRUTE_LIMIT = 20
EXHAUSTIVE_EXPANSION_LIMIT = 16


@dataclass(frozen=True)
class ExpanderSpec:
    n: int
    d: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2:
            raise GraphError(f"vertex count must be even and >= 2, got {self.n}")
        if self.d < 1:
            raise GraphError("need at least one matching")


def gen_matching_union(spec: ExpanderSpec) -> CapacitatedGraph:
    """Union of ``d`` uniform perfect matchings, kept as a multigraph.

    Each matching shuffles the vertex array (Fisher-Yates) and pairs
    positions ``(2i, 2i+1)``. Repeated pairs stay as parallel edges so the
    result is exactly ``d``-regular.
    """
    rng = random.Random(spec.seed)
    pairs = []
    for _ in range(spec.d):
        perm = list(range(spec.n))
        rng.shuffle(perm)
        for i in range(0, spec.n, 2):
            pairs.append((perm[i], perm[i + 1]))
    return CapacitatedGraph.from_edges(spec.n, pairs)


def _subset_tables(g: CapacitatedGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cut size and volume for every subset mask not containing vertex n-1."""
    n = g.n
    masks = np.arange(1 << (n - 1), dtype=np.int64)
    cut = np.zeros(masks.shape, dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    for e in g.edges:
        cut += ((masks >> e.u) ^ (masks >> e.v)) & 1
        deg[e.u] += 1
        deg[e.v] += 1
    vol = np.zeros(masks.shape, dtype=np.int64)
    for b in range(n - 1):
        vol += ((masks >> b) & 1) * deg[b]
    return masks, cut, vol


def conductance_brute(g: CapacitatedGraph) -> Fraction:
    """Exact conductance by enumerating every proper nonempty vertex subset.

    Volumes are degree sums counted with edge multiplicity; capacities are
    ignored.
    """
    if not 2 <= g.n <= BRUTE_LIMIT:
        raise GraphError(f"conductance_brute needs 2 <= n <= {BRUTE_LIMIT}, got {g.n}")
    masks, cut, vol = _subset_tables(g)
    total = 2 * g.m
    # every proper subset or its complement avoids vertex n-1; mask 0 is S = {}
    keep = masks > 0
    cut, vol = cut[keep], vol[keep]
    if np.any(cut == 0):
        return Fraction(0)
    minvol = np.minimum(vol, total - vol)
    approx = cut / minvol
    best = approx.min()
    cand = np.nonzero(approx <= best + 1e-9)[0]
    return min(Fraction(int(cut[i]), int(minvol[i])) for i in cand)


def normalized_laplacian(g: CapacitatedGraph) -> scipy.sparse.csr_matrix:
    rows = [e.u for e in g.edges] + [e.v for e in g.edges]
    cols = [e.v for e in g.edges] + [e.u for e in g.edges]
    adj = scipy.sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n)).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = scipy.sparse.diags(1.0 / np.sqrt(deg))
    return (scipy.sparse.identity(g.n) - inv @ adj @ inv).tocsr()


def spectral_lower_bound(g: CapacitatedGraph, tol: float = 1e-8) -> float:
    """Cheeger lower bound ``lambda_2 / 2`` on the conductance.

    Uses Lanczos (ARPACK) on larger graphs and a dense solve on tiny ones.
    """
    if g.n < 2 or not is_connected(g):
        raise GraphError("spectral bound needs a connected graph with n >= 2")
    lap = normalized_laplacian(g)
    if g.n <= 64:
        vals = scipy.linalg.eigvalsh(lap.toarray())
        lam2 = float(vals[1])
    else:
        # shift so the two smallest become the two largest-magnitude eigenvalues
        shifted = 2.0 * scipy.sparse.identity(g.n) - lap
        vals = scipy.sparse.linalg.eigsh(shifted, k=2, which="LA", tol=tol, return_eigenvectors=False)
        lam2 = float(2.0 - min(vals))
    # clamp rounding noise so the bound never exceeds the true value from above
    return max(0.0, lam2 - 1e-10) / 2.0


@dataclass(frozen=True)
class ExpansionReport:
    ratio: Fraction
    witness: tuple[int, ...]
    exhaustive: bool
    checked: int


def _neighborhood(g: CapacitatedGraph, subset: set[int]) -> set[int]:
    out = set()
    for x in subset:
        for y, _ in g.adjacency[x]:
            if y not in subset:
                out.add(y)
    return out


def expansion_check(g: CapacitatedGraph, trials: int = 200, seed: int = 0) -> ExpansionReport:
    """Smallest observed ``|N(U)| / |U|`` over sets with ``|U| <= n/2``.

    Exhaustive for ``n <= 16``; otherwise random sets of every size plus all
    BFS balls that fit the size bound.
    """
    n = g.n
    half = n // 2
    if half == 0:
        raise GraphError("graph too small for an expansion check")
    if n <= EXHAUSTIVE_EXPANSION_LIMIT:
        nbr = np.zeros(n, dtype=np.int64)
        for e in g.edges:
            nbr[e.u] |= 1 << e.v
            nbr[e.v] |= 1 << e.u
        reach = np.zeros(1 << n, dtype=np.int64)
        size = np.zeros(1 << n, dtype=np.int64)
        for b in range(n):
            lo, hi = 1 << b, 1 << (b + 1)
            reach[lo:hi] = reach[:lo] | nbr[b]
            size[lo:hi] = size[:lo] + 1
        masks = np.arange(1 << n, dtype=np.int64)
        outside = reach & ~masks
        nsize = np.zeros_like(size)
        for b in range(n):
            nsize += (outside >> b) & 1
        ok = (size >= 1) & (size <= half)
        idx = np.nonzero(ok)[0]
        # exact minimum: compare by cross multiplication via a float prefilter
        approx = nsize[idx] / size[idx]
        best = approx.min()
        cand = idx[approx <= best + 1e-12]
        ratios = [(Fraction(int(nsize[i]), int(size[i])), int(i)) for i in cand]
        ratio, mask = min(ratios)
        witness = tuple(b for b in range(n) if (mask >> b) & 1)
        return ExpansionReport(ratio, witness, True, int(idx.size))

    rng = random.Random(seed)
    best: tuple[Fraction, tuple[int, ...]] | None = None
    checked = 0

    def consider(subset: set[int]) -> None:
        nonlocal best, checked
        checked += 1
        r = Fraction(len(_neighborhood(g, subset)), len(subset))
        key = (r, tuple(sorted(subset)))
        if best is None or key < best:
            best = key

    for v in range(n):
        dist = bfs_distances(g, [v])
        radius = 0
        while True:
            ball = {x for x in range(n) if 0 <= dist[x] <= radius}
            if len(ball) > half:
                break
            consider(ball)
            if len(ball) == sum(1 for x in dist if x >= 0):
                break
            radius += 1
    for _ in range(trials):
        size = rng.randint(1, half)
        consider(set(rng.sample(range(n), size)))
    assert best is not None
    return ExpansionReport(best[0], best[1], False, checked)
