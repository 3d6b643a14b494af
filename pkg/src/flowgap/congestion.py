"""Congestion bounds, the LP oracle, gap certificates and convex combinations.

Every reported number is an exact rational. The LP oracle solves in floating
point, then certifies its answer: a decomposed and exactly rescaled primal
flow gives an upper bound, the rationalized dual lengths a lower bound, and
the reported value is the simplest rational between the two.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
import scipy.optimize
import scipy.sparse

from .clustering import ClusterParams
from .demand import DemandAssembly, PairBook, assemble_demand, harvest_pairs
from .formats import format_demand, format_graph, format_partition
from .graph import (
    INF,
    CapacitatedGraph,
    ContractedGraph,
    Demand,
    Edge,
    FlowPath,
    GraphError,
    Partition,
    bfs_distances,
    contract,
    total_capacity,
    validate_partition,
)

log = logging.getLogger(__name__)

LP_MAX_NODES = 200
LP_MAX_TERMINALS = 12
LP_TOLERANCE = 1e-9

ARTIFACT_FILES = {
    "instance": "instance.txt",
    "partition": "partition.txt",
    "demand": "demand.txt",
    "paths": "paths.txt",
    "pairs": "pairs.txt",
    "layers": "layers.txt",
    "superedges": "superedges.txt",
}


def _sources(d: Demand) -> dict[int, list[tuple[int, Fraction]]]:
    by_src: dict[int, list[tuple[int, Fraction]]] = {}
    for (a, b), val in d.positive():
        by_src.setdefault(a, []).append((b, val))
    return by_src


def congestion_lower_bound(g, d: Demand) -> Fraction | float:
    """``sum D(t,t') * dist(t,t') / c(E)``; ``math.inf`` if a pair is disconnected."""
    cap = total_capacity(g)
    if cap <= 0:
        raise GraphError("total capacity must be positive")
    acc = Fraction(0)
    for a, rows in _sources(d).items():
        dist = bfs_distances(g, [a])
        for b, val in rows:
            if dist[b] == INF:
                return math.inf
            acc += val * dist[b]
    return acc / Fraction(cap)


def average_congestion_lower_bound(g, d: Demand) -> Fraction | float:
    """Total flow-length of shortest-path routing over total capacity.

    Shortest paths minimize total flow-length, so this equals the distance
    bound; average congestion never exceeds the maximum one.
    """
    volume = Fraction(0)
    for (a, b), val in d.positive():
        dist = bfs_distances(g, [a])[b]
        if dist == INF:
            return math.inf
        volume += val * dist
    return volume / Fraction(total_capacity(g))


def edge_loads(h, routing: Sequence[FlowPath]) -> dict[int, Fraction]:
    """Flow per edge id, validating that each path is a walk in ``h``."""
    loads: dict[int, Fraction] = {}
    for path in routing:
        if len(path.edges) != len(path.nodes) - 1:
            raise GraphError("path has mismatched node and edge counts")
        for x, y, eid in zip(path.nodes, path.nodes[1:], path.edges):
            if not 0 <= eid < len(h.edges):
                raise GraphError(f"path uses nonexistent edge {eid}")
            e = h.edges[eid]
            if {e.u, e.v} != {x, y}:
                raise GraphError(f"edge {eid} does not join {x} and {y}")
            loads[eid] = loads.get(eid, Fraction(0)) + Fraction(path.value)
    return loads


def routing_congestion(h, routing: Sequence[FlowPath], demand: Demand | None = None) -> Fraction:
    """Max over edges of load / capacity; checks routed totals against ``demand``."""
    if demand is not None:
        routed: dict[tuple[int, int], Fraction] = {}
        for path in routing:
            if path.nodes[0] == path.nodes[-1]:
                raise GraphError("path starts and ends at the same node")
            key = path.commodity
            routed[key] = routed.get(key, Fraction(0)) + Fraction(path.value)
        want = dict(demand.positive())
        if {k: v for k, v in routed.items() if v} != want:
            raise GraphError("routed totals differ from the demand")
    worst = Fraction(0)
    for eid, load in edge_loads(h, routing).items():
        if load == 0:
            continue
        cap = h.edges[eid].cap
        if cap == 0:
            raise GraphError(f"flow on zero-capacity edge {eid}")
        worst = max(worst, load / Fraction(cap))
    return worst


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Smallest-denominator rational in ``[lo, hi]`` (Stern-Brocot descent)."""
    if lo > hi:
        raise ValueError("empty interval")
    if lo < 0:
        if hi >= 0:
            return Fraction(0)
        return -simplest_between(-hi, -lo)
    fl = math.floor(lo)
    if fl == lo:
        return Fraction(fl)
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    return fl + 1 / simplest_between(1 / (hi - fl), 1 / (lo - fl))


@dataclass(frozen=True)
class LPResult:
    value: Fraction
    lower: Fraction
    upper: Fraction
    flow: list[FlowPath]
    certified: bool


def _dijkstra(h, lengths: Sequence[Fraction], src: int) -> list[Fraction | None]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(h.n)]
    for e in h.edges:
        adj[e.u].append((e.v, e.id))
        adj[e.v].append((e.u, e.id))
    dist: list[Fraction | None] = [None] * h.n
    dist[src] = Fraction(0)
    heap = [(Fraction(0), src)]
    done = [False] * h.n
    while heap:
        dx, x = heapq.heappop(heap)
        if done[x]:
            continue
        done[x] = True
        for y, eid in adj[x]:
            nd = dx + lengths[eid]
            if dist[y] is None or nd < dist[y]:
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return dist


def _decompose(h, s: int, t: int, fwd: np.ndarray, bwd: np.ndarray, demand: Fraction) -> list[FlowPath]:
    """Split one commodity's float flow into s-t paths, rescaled to ``demand`` exactly."""
    net = fwd - bwd
    thresh = 1e-12 * max(1.0, float(demand))
    out: list[dict[int, float]] = [dict() for _ in range(h.n)]  # tail -> {edge id: amount}
    heads: dict[int, int] = {}
    for e in h.edges:
        x = float(net[e.id])
        if e.cap == 0 or abs(x) <= thresh:
            continue
        if x > 0:
            out[e.u][e.id] = x
            heads[e.id] = e.v
        else:
            out[e.v][e.id] = -x
            heads[e.id] = e.u
    raw: list[tuple[tuple[int, ...], tuple[int, ...], float]] = []
    for _ in range(4 * len(h.edges) + 4):
        # DFS over arcs carrying flow, never revisiting a node
        parent = {s: (-1, -1)}
        stack = [s]
        while stack and t not in parent:
            x = stack.pop()
            for eid, amt in sorted(out[x].items()):
                y = heads[eid]
                if amt > thresh and y not in parent:
                    parent[y] = (x, eid)
                    stack.append(y)
        if t not in parent:
            break
        nodes, edges = [t], []
        while nodes[-1] != s:
            x, eid = parent[nodes[-1]]
            edges.append(eid)
            nodes.append(x)
        nodes.reverse()
        edges.reverse()
        push = min(out[x][eid] for x, eid in zip(nodes, edges))
        for x, eid in zip(nodes, edges):
            out[x][eid] -= push
        raw.append((tuple(nodes), tuple(edges), push))
    if not raw:
        raise GraphError(f"LP flow carries nothing from {s} to {t}")
    total = sum(Fraction(v) for _, _, v in raw)
    return [FlowPath(nodes, edges, Fraction(v) * demand / total) for nodes, edges, v in raw]


def lp_min_congestion(h, d: Demand) -> LPResult:
    """Exact minimum congestion of ``d`` in ``h`` via the edge-based LP."""
    comm = d.positive()
    if h.n > LP_MAX_NODES or len(d.nodes()) > LP_MAX_TERMINALS:
        raise GraphError(
            f"LP oracle limited to {LP_MAX_NODES} nodes and {LP_MAX_TERMINALS} demand endpoints"
        )
    if not comm:
        return LPResult(Fraction(0), Fraction(0), Fraction(0), [], True)
    m, n, kc = len(h.edges), h.n, len(comm)
    nvar = kc * 2 * m + 1
    lam = nvar - 1
    us = np.array([e.u for e in h.edges], dtype=np.int64)
    vs = np.array([e.v for e in h.edges], dtype=np.int64)
    eidx = np.arange(m)
    rows, cols, vals = [], [], []
    b_eq = np.zeros(kc * n)
    for j, ((s, t), dem) in enumerate(comm):
        base_r, base_c = j * n, j * 2 * m
        fwd, bwd = base_c + 2 * eidx, base_c + 2 * eidx + 1
        # forward arc leaves u and enters v; backward the reverse
        rows += [base_r + us, base_r + vs, base_r + vs, base_r + us]
        cols += [fwd, fwd, bwd, bwd]
        vals += [np.ones(m), -np.ones(m), np.ones(m), -np.ones(m)]
        b_eq[base_r + s] = float(dem)
        b_eq[base_r + t] = -float(dem)
    a_eq = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(kc * n, nvar)
    )
    ub_rows = np.concatenate([eidx] * (2 * kc) + [eidx])
    ub_cols = np.concatenate(
        [j * 2 * m + 2 * eidx + side for j in range(kc) for side in (0, 1)] + [np.full(m, lam)]
    )
    caps = np.array([float(e.cap) for e in h.edges])
    ub_vals = np.concatenate([np.ones(m)] * (2 * kc) + [-caps])
    a_ub = scipy.sparse.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(m, nvar))
    cost = np.zeros(nvar)
    cost[lam] = 1.0
    res = scipy.optimize.linprog(
        cost, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs"
    )
    if res.status != 0:
        raise GraphError(f"LP solver failed: {res.message}")

    flow: list[FlowPath] = []
    for j, ((s, t), dem) in enumerate(comm):
        seg = res.x[j * 2 * m : (j + 1) * 2 * m]
        flow += _decompose(h, s, t, seg[0::2], seg[1::2], dem)
    upper = routing_congestion(h, flow, d)

    lengths = [max(Fraction(-float(y)), Fraction(0)) for y in res.ineqlin.marginals]
    norm = sum((Fraction(e.cap) * lengths[e.id] for e in h.edges), Fraction(0))
    lower = Fraction(0)
    if norm > 0:
        lengths = [x / norm for x in lengths]
        for a, rows_ in _sources(d).items():
            dist = _dijkstra(h, lengths, a)
            for b, val in rows_:
                lower += val * dist[b]
    lower = min(lower, upper)
    certified = upper - lower <= LP_TOLERANCE * max(1, upper)
    if not certified:
        log.warning("LP bounds %s and %s are not within tolerance", float(lower), float(upper))
    value = simplest_between(lower, upper) if certified else upper
    return LPResult(value, lower, upper, flow, certified)


def _frac(x) -> dict | str | None:
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    x = Fraction(x)
    return {"num": x.numerator, "den": x.denominator}


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CertifyParams:
    """Harvest settings plus whatever the caller wants recorded verbatim."""

    cluster: ClusterParams
    m: int
    lp_oracle: bool = False
    record: dict = field(default_factory=dict)

    def describe(self) -> dict:
        out = dict(self.record)
        out.update({"m": self.m, "lp_oracle": self.lp_oracle})
        out.update({f"cluster_{k}": v for k, v in self.cluster.describe().items()})
        return out


@dataclass
class ComponentRun:
    """Pipeline outputs for one partition."""

    partition: Partition
    h: ContractedGraph
    book: PairBook
    assembly: DemandAssembly

    @property
    def demand(self) -> Demand:
        return self.assembly.demand

    @property
    def demand_h(self) -> Demand:
        return self.assembly.demand.relabeled(self.partition.assignment)

    def disjointness(self) -> dict:
        worst = {}
        for name, loads in self.assembly.family_load.items():
            worst[name] = max(
                (Fraction(x, 1) / Fraction(self.h.edges[sid].cap) for sid, x in loads.items()),
                default=Fraction(0),
            )
        used = {}
        for loads in self.assembly.family_load.values():
            for sid in loads:
                used[sid] = used.get(sid, 0) + 1
        overlap = sum(1 for c in used.values() if c > 1)
        return {"worst": worst, "overlap": overlap}


def run_component(g: CapacitatedGraph, p: Partition, params: CertifyParams) -> ComponentRun:
    bad = validate_partition(g, p)
    if bad is not None:
        raise GraphError(f"terminals {bad[0]} and {bad[1]} share a cluster")
    h = contract(g, p)
    book = harvest_pairs(g, p, params.cluster, params.m)
    book.check()
    assembly = assemble_demand(g, p, h, book)
    return ComponentRun(p, h, book, assembly)


@dataclass
class GapCertificate:
    """Lower bound in G, explicit routing bound in the sparsifier, their ratio."""

    params: dict
    hashes: dict
    weights: list[Fraction]
    n: int
    k: int
    h_nodes: int
    h_edges: int
    lower_g: Fraction | float
    upper_h: Fraction
    ratio: Fraction | None
    lp_g: Fraction | None
    lp_h: Fraction | None
    m_target: int
    m_achieved: int
    demand_pairs: int
    self_pairs: int
    dropped_pairs: int
    sum_dist: int
    sum_demand_dist: Fraction
    stop_reason: str
    aborted: bool
    partial: bool
    bad_node_vector: list[int]
    disjointness: dict
    deviations: list[str]
    demand: Demand = field(compare=False, repr=False, default_factory=Demand)
    routing: list[FlowPath] = field(compare=False, repr=False, default_factory=list)
    sparsifier: Any = field(compare=False, repr=False, default=None)
    components: list[ComponentRun] = field(compare=False, repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "hashes": self.hashes,
            "weights": [_frac(w) for w in self.weights],
            "n": self.n,
            "k": self.k,
            "h_nodes": self.h_nodes,
            "h_edges": self.h_edges,
            "lower_g": _frac(self.lower_g),
            "upper_h": _frac(self.upper_h),
            "ratio": _frac(self.ratio),
            "lp_g": _frac(self.lp_g),
            "lp_h": _frac(self.lp_h),
            "m_target": self.m_target,
            "m_achieved": self.m_achieved,
            "demand_pairs": self.demand_pairs,
            "self_pairs": self.self_pairs,
            "dropped_pairs": self.dropped_pairs,
            "sum_dist": self.sum_dist,
            "sum_demand_dist": _frac(self.sum_demand_dist),
            "stop_reason": self.stop_reason,
            "aborted": self.aborted,
            "partial": self.partial,
            "bad_node_vector": self.bad_node_vector,
            "disjointness": {
                "worst_family_load": {k: _frac(v) for k, v in self.disjointness["worst"].items()},
                "shared_superedges": self.disjointness["overlap"],
            },
            "deviations": self.deviations,
            "files": ARTIFACT_FILES,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _ratio(lower, upper) -> Fraction | None:
    if upper == 0 or (isinstance(lower, float) and math.isinf(lower)):
        return None
    return Fraction(lower) / upper


def _lp_pair(g, d: Demand, hgraph, dh: Demand, notes: list[str]):
    try:
        lp_g = lp_min_congestion(g, d).value
        lp_h = lp_min_congestion(hgraph, dh).value
    except GraphError as exc:
        notes.append(f"lp oracle skipped: {exc}")
        return None, None
    return lp_g, lp_h


def _sum_demand_dist(g, d: Demand) -> Fraction:
    acc = Fraction(0)
    for a, rows in _sources(d).items():
        dist = bfs_distances(g, [a])
        acc += sum((val * dist[b] for b, val in rows if dist[b] != INF), Fraction(0))
    return acc


def _merge_disjointness(parts: list[dict]) -> dict:
    worst: dict[str, Fraction] = {}
    for part in parts:
        for name, val in part["worst"].items():
            worst[name] = max(worst.get(name, Fraction(0)), val)
    return {"worst": worst, "overlap": sum(part["overlap"] for part in parts)}


def _sum_vectors(vectors: list[list[int]]) -> list[int]:
    size = max((len(v) for v in vectors), default=0)
    return [sum(v[i] for v in vectors if i < len(v)) for i in range(size)]


def _stop_reason(runs: list[ComponentRun]) -> str:
    reasons = sorted({r.book.stop_reason for r in runs})
    return reasons[0] if len(reasons) == 1 else "mixed:" + ",".join(reasons)


def certify_gap(
    g: CapacitatedGraph, p: Partition, params: CertifyParams, notes: Sequence[str] = ()
) -> GapCertificate:
    run = run_component(g, p, params)
    h, d, dh = run.h, run.demand, run.demand_h
    deviations = list(notes)
    lower = congestion_lower_bound(g, d) if not d.is_zero() else Fraction(0)
    upper = routing_congestion(h, run.assembly.routing, dh)
    lp_g = lp_h = None
    if params.lp_oracle:
        lp_g, lp_h = _lp_pair(g, d, h, dh, deviations)
    return GapCertificate(
        params=params.describe(),
        hashes={
            "instance": sha256_text(format_graph(g)),
            "partitions": [sha256_text(format_partition(p))],
            "demand": sha256_text(format_demand(d)),
        },
        weights=[Fraction(1)],
        n=g.n,
        k=g.k,
        h_nodes=h.n,
        h_edges=h.m,
        lower_g=lower,
        upper_h=upper,
        ratio=_ratio(lower, upper) if not d.is_zero() else None,
        lp_g=lp_g,
        lp_h=lp_h,
        m_target=params.m,
        m_achieved=len(run.book.pairs),
        demand_pairs=len(run.assembly.routing),
        self_pairs=run.assembly.self_pairs,
        dropped_pairs=len(run.assembly.dropped),
        sum_dist=sum(run.book.dists),
        sum_demand_dist=_sum_demand_dist(g, d),
        stop_reason=run.book.stop_reason,
        aborted=run.book.aborted,
        partial=run.book.aborted or run.assembly.partial,
        bad_node_vector=run.book.bad_node_vector,
        disjointness=run.disjointness(),
        deviations=deviations,
        demand=d,
        routing=list(run.assembly.routing),
        sparsifier=h,
        components=[run],
    )


@dataclass(frozen=True)
class ConvexCombination:
    parts: tuple[tuple[Partition, Fraction], ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise GraphError("empty distribution")
        probs = [Fraction(w) for _, w in self.parts]
        if any(w <= 0 for w in probs):
            raise GraphError("probabilities must be positive")
        if sum(probs) != 1:
            raise GraphError(f"probabilities sum to {sum(probs)}, not 1")
        object.__setattr__(self, "parts", tuple((p, Fraction(w)) for p, w in self.parts))


@dataclass(frozen=True)
class GluedGraph:
    """Scaled copies of each sparsifier, identified at the terminal supernodes.

    Terminals take ids ``0..k-1`` in terminal order; each copy's other
    supernodes follow in copy order. ``node_maps[j][c]`` is the glued id of
    cluster ``c`` of copy ``j`` and ``edge_offsets[j]`` the first edge id of
    that copy.
    """

    graph: CapacitatedGraph
    node_maps: tuple[tuple[int, ...], ...]
    edge_offsets: tuple[int, ...]


def glue(g: CapacitatedGraph, runs: Sequence[ComponentRun], weights: Sequence[Fraction]) -> GluedGraph:
    k = g.k
    next_id = k
    maps, offsets, edges = [], [], []
    for run, w in zip(runs, weights):
        p = run.partition
        term_of = {p[t]: i for i, t in enumerate(g.terminals)}
        mapping = []
        for c in range(p.f):
            if c in term_of:
                mapping.append(term_of[c])
            else:
                mapping.append(next_id)
                next_id += 1
        offsets.append(len(edges))
        for e in run.h.edges:
            edges.append(Edge(len(edges), mapping[e.u], mapping[e.v], Fraction(e.cap) * w))
        maps.append(tuple(mapping))
    graph = CapacitatedGraph(next_id, tuple(edges), tuple(range(k)))
    return GluedGraph(graph, tuple(maps), tuple(offsets))


def convex_combine(
    g: CapacitatedGraph, mu: ConvexCombination, params: CertifyParams, notes: Sequence[str] = ()
) -> tuple[GluedGraph, Demand, GapCertificate]:
    runs = [run_component(g, p, params) for p, _ in mu.parts]
    weights = [w for _, w in mu.parts]
    glued = glue(g, runs, weights)
    term_index = {t: i for i, t in enumerate(g.terminals)}
    d_mu = Demand({})
    routing: list[FlowPath] = []
    for j, (run, w) in enumerate(zip(runs, weights)):
        d_mu = d_mu + run.demand.scaled(w)
        mapping, off = glued.node_maps[j], glued.edge_offsets[j]
        for path in run.assembly.routing:
            routing.append(
                FlowPath(
                    tuple(mapping[c] for c in path.nodes),
                    tuple(off + sid for sid in path.edges),
                    path.value * w,
                )
            )
    d_glued = d_mu.relabeled(term_index)
    deviations = list(notes)
    lower = congestion_lower_bound(g, d_mu) if not d_mu.is_zero() else Fraction(0)
    upper = routing_congestion(glued.graph, routing, d_glued)
    lp_g = lp_h = None
    if params.lp_oracle:
        lp_g, lp_h = _lp_pair(g, d_mu, glued.graph, d_glued, deviations)
    cert = GapCertificate(
        params=params.describe(),
        hashes={
            "instance": sha256_text(format_graph(g)),
            "partitions": [sha256_text(format_partition(p)) for p, _ in mu.parts],
            "demand": sha256_text(format_demand(d_mu)),
        },
        weights=weights,
        n=g.n,
        k=g.k,
        h_nodes=glued.graph.n,
        h_edges=glued.graph.m,
        lower_g=lower,
        upper_h=upper,
        ratio=_ratio(lower, upper) if not d_mu.is_zero() else None,
        lp_g=lp_g,
        lp_h=lp_h,
        m_target=params.m,
        m_achieved=sum(len(r.book.pairs) for r in runs),
        demand_pairs=len(routing),
        self_pairs=sum(r.assembly.self_pairs for r in runs),
        dropped_pairs=sum(len(r.assembly.dropped) for r in runs),
        sum_dist=sum(sum(r.book.dists) for r in runs),
        sum_demand_dist=_sum_demand_dist(g, d_mu),
        stop_reason=_stop_reason(runs),
        aborted=any(r.book.aborted for r in runs),
        partial=any(r.book.aborted or r.assembly.partial for r in runs),
        bad_node_vector=_sum_vectors([r.book.bad_node_vector for r in runs]),
        disjointness=_merge_disjointness([r.disjointness() for r in runs]),
        deviations=deviations,
        demand=d_mu,
        routing=routing,
        sparsifier=glued,
        components=runs,
    )
    return glued, d_mu, cert
