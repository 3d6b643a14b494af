"""Run configuration, partition sources, artifact writing, sweeps and export."""

from __future__ import annotations

import csv
import json
import logging
import math
import random
import statistics
from collections import deque
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from .clustering import ClusterParams
from .congestion import CertifyParams, GapCertificate, certify_gap, edge_loads, routing_congestion
from .expander import ExpanderSpec, gen_matching_union
from .formats import (
    load_partition,
    save_demand,
    save_graph,
    save_layers,
    save_pairs,
    save_partition,
    save_paths,
    save_superedges,
)
from .graph import INF, CapacitatedGraph, GraphError, Partition, total_capacity, validate_partition
from .surgery import (
    InstanceParams,
    LayerDecomposition,
    CapacityTree,
    assign_capacities,
    build_capacity_tree,
    check_telescoping,
    layer_decomposition,
    pick_terminals,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2

FIXED_DEVIATIONS = (
    "tree edges take capacity max(c', 1); all other edges capacity 1",
    "parallel crossing edges between two clusters merge into one superedge of summed capacity",
)


class ConfigError(ValueError):
    pass


class InvariantError(AssertionError):
    pass


def _opt_int(x: str) -> int | None:
    return None if x.lower() in ("", "none", "auto") else int(x)


def _opt_float(x: str) -> float | None:
    return None if x.lower() in ("", "none", "auto") else float(x)


def _bool(x: str) -> bool:
    low = x.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {x!r}")


def parse_int_list(text: str) -> list[int]:
    """``1..5``, ``[1..5]``, ``1,2,3`` or a mix such as ``1..3,7``."""
    text = text.strip().strip("[]")
    out: list[int] = []
    for part in filter(None, (x.strip() for x in text.split(","))):
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("empty list")
    return out


@dataclass(frozen=True)
class RunConfig:
    n: int = 1024
    d: int = 10
    epsilon: float = 0.2
    k: int | None = None
    m: int | None = None
    seed: int = 0
    seeds: tuple[int, ...] | None = None
    partition_source: str = "pipeline-random"
    clusters: int | None = None
    sample_terminals: bool = False
    lp_oracle: bool = False
    s: float | None = None
    growth: float | None = None
    levels: int | None = None
    useless_fraction: float | None = None
    bad_fraction: float | None = None

    def cluster_params(self) -> ClusterParams:
        extra = {}
        if self.useless_fraction is not None:
            extra["useless_fraction"] = self.useless_fraction
        if self.bad_fraction is not None:
            extra["bad_fraction"] = self.bad_fraction
        return ClusterParams(self.n, self.epsilon, self.s, self.growth, self.levels, **extra)

    def overrides(self) -> dict:
        keys = ("s", "growth", "levels", "useless_fraction", "bad_fraction", "clusters", "k", "m")
        return {key: getattr(self, key) for key in keys if getattr(self, key) is not None}

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            if f.name == "seeds":
                val = ",".join(map(str, val))
            lines.append(f"{f.name}={str(val).lower() if isinstance(val, bool) else val}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    "n": int,
    "d": int,
    "epsilon": float,
    "k": _opt_int,
    "m": _opt_int,
    "seed": int,
    "seeds": lambda x: tuple(parse_int_list(x)),
    "partition_source": str,
    "clusters": _opt_int,
    "sample_terminals": _bool,
    "lp_oracle": _bool,
    "s": _opt_float,
    "growth": _opt_float,
    "levels": _opt_int,
    "useless_fraction": _opt_float,
    "bad_fraction": _opt_float,
}


def config_from_pairs(pairs: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    values = {}
    for key, raw in pairs.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _PARSERS[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for config key {key!r}: {exc}") from None
    cfg = replace(base or RunConfig(), **values)
    _check_source(cfg.partition_source)
    return cfg


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        pairs[key.strip()] = val
    return config_from_pairs(pairs, base)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _check_source(src: str) -> None:
    if src in ("pipeline-random", "singleton") or src.startswith("file:"):
        return
    if src.startswith("bfs-balls:"):
        try:
            if int(src.split(":", 1)[1]) < 0:
                raise ValueError
        except ValueError:
            raise ConfigError(f"bad radius in partition_source {src!r}") from None
        return
    raise ConfigError(f"unknown partition_source {src!r}")


@dataclass
class Instance:
    params: InstanceParams
    base: CapacitatedGraph  # unit capacities, terminals chosen
    layers: LayerDecomposition
    tree: CapacityTree
    graph: CapacitatedGraph  # final capacities

    @property
    def r(self) -> int:
        return self.layers.r


def build_instance(cfg: RunConfig) -> Instance:
    params = InstanceParams(cfg.n, cfg.d, cfg.epsilon, cfg.k, cfg.m, cfg.seed, cfg.sample_terminals)
    raw = gen_matching_union(ExpanderSpec(cfg.n, cfg.d, cfg.seed))
    base = pick_terminals(raw, params)
    layers = layer_decomposition(base, params.m)
    tree = build_capacity_tree(base, layers)
    graph = assign_capacities(base, tree)
    return Instance(params, base, layers, tree, graph)


def check_instance(inst: Instance) -> None:
    if not check_telescoping(inst.tree):
        raise InvariantError("capacity tree weights do not telescope")
    g = inst.graph
    if any(e.cap < 1 for e in g.edges):
        raise InvariantError("an edge capacity is below 1")
    bound = g.m + inst.r * len(inst.tree.boundary)
    if total_capacity(g) > bound:
        raise InvariantError(f"total capacity {total_capacity(g)} exceeds {bound}")


def _voronoi(g: CapacitatedGraph, seeds: list[int]) -> Partition:
    """Multi-source BFS; each vertex joins the first seed to reach it."""
    label = [-1] * g.n
    queue = deque()
    for c, v in enumerate(seeds):
        label[v] = c
        queue.append(v)
    while queue:
        x = queue.popleft()
        for y, _ in g.adjacency[x]:
            if label[y] < 0:
                label[y] = label[x]
                queue.append(y)
    nxt = len(seeds)
    for v in range(g.n):
        if label[v] < 0:
            label[v] = nxt
            nxt += 1
    return Partition.from_labels(label)


def random_cluster_count(cfg: RunConfig, k: int) -> int:
    if cfg.clusters is not None:
        return cfg.clusters
    s = ClusterParams(cfg.n, cfg.epsilon).s  # formula value, ignoring threshold overrides
    return max(k, math.ceil(cfg.n / s))


def make_partition(cfg: RunConfig, g: CapacitatedGraph) -> Partition:
    src = cfg.partition_source
    if src == "singleton":
        return Partition.singletons(g.n)
    if src.startswith("file:"):
        return load_partition(src[5:], g.n)
    if src.startswith("bfs-balls:"):
        radius = int(src.split(":", 1)[1])
        label = [-1] * g.n
        centers = list(g.terminals)
        c = 0
        nxt = 0
        while True:
            if c < len(centers):
                center = centers[c]
            else:
                while nxt < g.n and label[nxt] >= 0:
                    nxt += 1
                if nxt == g.n:
                    break
                center = nxt
            dist = _bounded_bfs(g, center, radius, label)
            for v in dist:
                label[v] = c
            c += 1
        return Partition.from_labels(label)
    # pipeline-random
    f = random_cluster_count(cfg, g.k)
    if not g.k <= f <= g.n:
        raise ConfigError(f"cluster count {f} outside [k, n]")
    rng = random.Random(f"partition-{cfg.seed}")
    others = [v for v in range(g.n) if v not in g.terminal_set]
    return _voronoi(g, list(g.terminals) + rng.sample(others, f - g.k))


def _bounded_bfs(g: CapacitatedGraph, center: int, radius: int, label: list[int]) -> list[int]:
    """Unassigned vertices within ``radius`` of ``center`` through unassigned vertices.

    Terminals other than the center are never claimed, so each ball holds at
    most one terminal.
    """
    if label[center] >= 0:
        return []
    seen = {center: 0}
    queue = deque([center])
    while queue:
        x = queue.popleft()
        if seen[x] == radius:
            continue
        for y, _ in g.adjacency[x]:
            if y not in seen and label[y] < 0 and y not in g.terminal_set:
                seen[y] = seen[x] + 1
                queue.append(y)
    return sorted(seen)


@dataclass
class RunResult:
    config: RunConfig
    outdir: Path
    exit_code: int
    certificate: GapCertificate | None = None
    instance: Instance | None = None
    error: str | None = None


def certify_config(cfg: RunConfig) -> tuple[Instance, Partition, GapCertificate]:
    inst = build_instance(cfg)
    check_instance(inst)
    p = make_partition(cfg, inst.graph)
    bad = validate_partition(inst.graph, p)
    if bad is not None:
        raise GraphError(f"invalid partition: terminals {bad[0]} and {bad[1]} share cluster {p[bad[0]]}")
    record = {
        "n": cfg.n,
        "d": cfg.d,
        "epsilon": cfg.epsilon,
        "k": inst.params.k,
        "seed": cfg.seed,
        "partition_source": cfg.partition_source,
        "clusters": p.f,
        "sample_terminals": cfg.sample_terminals,
        "r": inst.r,
        "boundary_edges": len(inst.tree.boundary),
        "c_total": int(total_capacity(inst.graph)),
        "overrides": cfg.overrides(),
    }
    params = CertifyParams(cfg.cluster_params(), inst.params.m, cfg.lp_oracle, record)
    notes = list(FIXED_DEVIATIONS) + list(inst.params.notes)
    if inst.layers.degenerate:
        notes.append("terminal ball already reaches 2m vertices; capacity tree is empty")
    cert = certify_gap(inst.graph, p, params, notes)
    if cert.upper_h > 3:
        raise InvariantError(f"explicit routing congestion {cert.upper_h} exceeds 3")
    return inst, p, cert


def write_artifacts(outdir: Path, inst: Instance, p: Partition, cert: GapCertificate) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    run = cert.components[0]
    save_graph(inst.graph, outdir / "instance.txt")
    save_partition(p, outdir / "partition.txt")
    save_demand(cert.demand, outdir / "demand.txt")
    save_paths([path.nodes for path in cert.routing], outdir / "paths.txt")
    save_pairs(run.assembly.terminal_pairs, outdir / "pairs.txt")
    save_layers(list(inst.layers.dist), outdir / "layers.txt")
    loads = edge_loads(run.h, cert.routing)
    save_superedges(
        ((e.id, e.u, e.v, e.cap, loads.get(e.id, Fraction(0))) for e in run.h.edges),
        outdir / "superedges.txt",
    )
    lines = ["# round groups diameters bad_per_level purity"]
    for i, tr in enumerate(run.book.trace):
        purity = "-" if tr.purity is None else f"{tr.purity.numerator}/{tr.purity.denominator}"
        lines.append(
            f"{i} {tr.groups} {','.join(map(str, tr.diameters))} {','.join(map(str, tr.b))} {purity}"
        )
    (outdir / "trace.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (outdir / "certificate.json").write_text(cert.to_json(), encoding="utf-8")


def run_single(cfg: RunConfig, outdir: str | Path) -> RunResult:
    outdir = Path(outdir)
    try:
        inst, p, cert = certify_config(cfg)
    except (GraphError, ConfigError, InvariantError, OSError) as exc:
        log.error("run failed: %s", exc)
        return RunResult(cfg, outdir, EXIT_ERROR, error=str(exc))
    write_artifacts(outdir, inst, p, cert)
    code = EXIT_PARTIAL if cert.partial else EXIT_OK
    return RunResult(cfg, outdir, code, cert, inst)


REPORT_COLUMNS = ("n", "seed", "r", "m_achieved", "sum_dist", "lower_g", "upper_h", "ratio", "aborted")


def _fnum(val) -> str:
    if val is None:
        return ""
    if isinstance(val, dict):
        return f"{val['num']}/{val['den']}"
    return str(val)


def certificate_row(cert: dict) -> dict:
    par = cert["params"]
    return {
        "n": cert["n"],
        "seed": par.get("seed", ""),
        "r": par.get("r", ""),
        "m_achieved": cert["m_achieved"],
        "sum_dist": cert["sum_dist"],
        "lower_g": _fnum(cert["lower_g"]),
        "upper_h": _fnum(cert["upper_h"]),
        "ratio": _fnum(cert["ratio"]),
        "aborted": int(cert["aborted"]),
    }


def _as_float(text: str) -> float | None:
    return float(Fraction(text)) if text else None


def run_pipeline(cfg: RunConfig, root: str | Path) -> int:
    """One run, or one subdirectory per seed plus ``aggregate.csv``."""
    root = Path(root)
    if cfg.seeds is None:
        return run_single(cfg, root).exit_code
    results = [run_single(replace(cfg, seed=s, seeds=None), root / f"seed-{s}") for s in cfg.seeds]
    rows = []
    for res in results:
        if res.certificate is not None:
            rows.append(certificate_row(res.certificate.to_dict()))
    _write_csv(root / "aggregate.csv", REPORT_COLUMNS, rows)
    _write_medians(root / "medians.csv", rows)
    return max((res.exit_code for res in results), key=lambda c: (c == EXIT_ERROR, c == EXIT_PARTIAL))


def _write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def summarize(rows: list[dict]) -> list[dict]:
    """Per n: median ratio and pair count, abort rate and run count."""
    by_n: dict[int, list[dict]] = {}
    for row in rows:
        by_n.setdefault(int(row["n"]), []).append(row)
    out = []
    for n in sorted(by_n):
        group = by_n[n]
        ratios = [_as_float(r["ratio"]) for r in group if r["ratio"] != ""]
        out.append(
            {
                "n": n,
                "runs": len(group),
                "median_ratio": statistics.median(ratios) if ratios else "",
                "median_m_achieved": statistics.median(int(r["m_achieved"]) for r in group),
                "abort_rate": sum(int(r["aborted"]) for r in group) / len(group),
            }
        )
    return out


def _write_medians(path: Path, rows: list[dict]) -> None:
    _write_csv(path, ("n", "runs", "median_ratio", "median_m_achieved", "abort_rate"), summarize(rows))


@dataclass
class SweepReport:
    rows: list[dict]
    summary: list[dict]
    r_trend: list[dict]
    exit_code: int
    errors: list[str] = field(default_factory=list)


def sweep(cfg: RunConfig, ns: list[int], seeds: list[int], root: str | Path) -> SweepReport:
    root = Path(root)
    rows, trend, errors = [], [], []
    worst = EXIT_OK
    for n in ns:
        alpha = InstanceParams(n, eps=cfg.epsilon, k=cfg.k or 2, m=cfg.m or 1).alpha
        for s in seeds:
            res = run_single(replace(cfg, n=n, seed=s, seeds=None), root / f"n{n}" / f"seed-{s}")
            if res.exit_code == EXIT_ERROR:
                errors.append(f"n={n} seed={s}: {res.error}")
                worst = EXIT_ERROR
                continue
            if res.exit_code == EXIT_PARTIAL and worst == EXIT_OK:
                worst = EXIT_PARTIAL
            rows.append(certificate_row(res.certificate.to_dict()))
            trend.append({"n": n, "seed": s, "r": res.instance.r, "log2n_pow_alpha": math.log2(n) ** alpha})
    summary = summarize(rows)
    _write_csv(root / "aggregate.csv", REPORT_COLUMNS, rows)
    _write_csv(root / "medians.csv", ("n", "runs", "median_ratio", "median_m_achieved", "abort_rate"), summary)
    _write_csv(root / "r_trend.csv", ("n", "seed", "r", "log2n_pow_alpha"), trend)
    (root / "sweep_config.txt").write_text(cfg.to_text(), encoding="utf-8")
    return SweepReport(rows, summary, trend, worst, errors)


def _run_dirs(root: Path) -> list[Path]:
    return sorted(p.parent for p in root.rglob("certificate.json"))


def export_report(root: str | Path, fmt: str) -> list[Path]:
    """``csv``: one row per certificate under ``root``; ``dot``: H with loads per run."""
    root = Path(root)
    dirs = _run_dirs(root) if root.is_dir() else []
    if not dirs:
        raise FileNotFoundError(f"no certificate.json under {root}")
    if fmt == "csv":
        rows = [certificate_row(json.loads((d / "certificate.json").read_text(encoding="utf-8"))) for d in dirs]
        out = root / "report.csv"
        _write_csv(out, REPORT_COLUMNS, rows)
        return [out]
    if fmt == "dot":
        from .formats import load_graph, load_superedges

        written = []
        for d in dirs:
            terms = set(load_partition(d / "partition.txt")[t] for t in load_graph(d / "instance.txt").terminals)
            lines = ["graph H {"]
            nodes = sorted({x for _, a, b, _, _ in load_superedges(d / "superedges.txt") for x in (a, b)} | terms)
            for x in nodes:
                shape = "box" if x in terms else "ellipse"
                lines.append(f'  {x} [shape={shape}];')
            for sid, a, b, cap, load in load_superedges(d / "superedges.txt"):
                lines.append(f'  {a} -- {b} [label="{load}/{cap}"];')
            lines.append("}")
            out = d / "h.dot"
            out.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(out)
        return written
    raise ValueError(f"unknown export format {fmt!r}")


def recompute_ratio(run_dir: str | Path) -> Fraction | None:
    """Rebuild the ratio from the written files alone."""
    from .formats import load_demand, load_graph, load_paths
    from .congestion import congestion_lower_bound
    from .graph import FlowPath, contract

    d = Path(run_dir)
    g = load_graph(d / "instance.txt")
    p = load_partition(d / "partition.txt", g.n)
    demand = load_demand(d / "demand.txt")
    if demand.is_zero():
        return None
    h = contract(g, p)
    routing = []
    for nodes in load_paths(d / "paths.txt"):
        edges = tuple(h.superedge(a, b) for a, b in zip(nodes, nodes[1:]))
        routing.append(FlowPath(tuple(nodes), edges, Fraction(1)))
    upper = routing_congestion(h, routing, demand.relabeled(p.assignment))
    return Fraction(congestion_lower_bound(g, demand)) / upper
