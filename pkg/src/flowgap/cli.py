"""Command line entry point: ``flowgap {gen,certify,sweep,export,oracle}``."""

from __future__ import annotations

import argparse
import logging
import os
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import pipeline
from .pipeline import EXIT_ERROR, EXIT_OK, ConfigError, RunConfig

ARTIFACT_ENV = "FLOWGAP_ARTIFACTS"

# flag name -> config key; flags mirror the config file
_FLAG_KEYS = [
    "n", "d", "epsilon", "k", "m", "seed", "seeds", "partition_source", "clusters",
    "sample_terminals", "lp_oracle", "s", "growth", "levels", "useless_fraction", "bad_fraction",
]


def _add_config_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key=value config file; flags override it")
    for key in _FLAG_KEYS:
        sp.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE")
    sp.add_argument("--out", help=f"artifact directory (default ${ARTIFACT_ENV} or ./artifacts)")


def _config(args) -> RunConfig:
    base = pipeline.load_config(args.config) if args.config else RunConfig()
    given = {key: getattr(args, key) for key in _FLAG_KEYS if getattr(args, key) is not None}
    return pipeline.config_from_pairs(given, base)


def _outdir(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(ARTIFACT_ENV, "artifacts")) / name


def _cmd_gen(args) -> int:
    cfg = _config(args)
    inst = pipeline.build_instance(cfg)
    pipeline.check_instance(inst)
    out = _outdir(args, f"gen-n{cfg.n}-seed{cfg.seed}")
    out.mkdir(parents=True, exist_ok=True)
    from .formats import save_graph, save_layers

    save_graph(inst.graph, out / "instance.txt")
    save_layers(list(inst.layers.dist), out / "layers.txt")
    print(f"n={cfg.n} k={inst.params.k} m={inst.params.m} r={inst.r} c(E)={sum(e.cap for e in inst.graph.edges)} -> {out}")
    return EXIT_OK


def _cmd_certify(args) -> int:
    cfg = _config(args)
    out = _outdir(args, f"n{cfg.n}-seed{cfg.seed}" if cfg.seeds is None else f"n{cfg.n}-sweep")
    code = pipeline.run_pipeline(cfg, out)
    if cfg.seeds is None and (out / "certificate.json").exists():
        import json

        cert = json.loads((out / "certificate.json").read_text(encoding="utf-8"))
        print(
            f"ratio={pipeline._fnum(cert['ratio']) or 'n/a'} lower_g={pipeline._fnum(cert['lower_g'])} "
            f"upper_h={pipeline._fnum(cert['upper_h'])} pairs={cert['m_achieved']} stop={cert['stop_reason']}"
        )
    print(f"artifacts: {out} (exit {code})")
    return code


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    ns = pipeline.parse_int_list(args.ns) if args.ns else [cfg.n]
    seeds = list(cfg.seeds) if cfg.seeds else [cfg.seed]
    out = _outdir(args, "sweep")
    report = pipeline.sweep(cfg, ns, seeds, out)
    for row in report.summary:
        print(
            f"n={row['n']} runs={row['runs']} median_ratio={row['median_ratio']} "
            f"abort_rate={row['abort_rate']:.2f}"
        )
    for err in report.errors:
        print("error:", err, file=sys.stderr)
    print(f"artifacts: {out}")
    return report.exit_code


def _cmd_export(args) -> int:
    for path in pipeline.export_report(args.dir, args.format):
        print(path)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    """Small-instance cross-checks against brute force; exit 1 on any mismatch."""
    from .expander import ExpanderSpec, conductance_brute, gen_matching_union, spectral_lower_bound
    from .graph import CapacitatedGraph
    from .routing import build_aux_graph, max_flow_value, mincut_brute_oracle

    rng = random.Random(args.seed)
    failures = 0
    for trial in range(args.trials):
        n = rng.randint(2, 12)
        pairs = [(u, v, rng.randint(1, 3)) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.35]
        k = rng.randint(1, min(3, n))
        g = CapacitatedGraph.from_edges(n, pairs, rng.sample(range(n), k))
        targets = rng.sample(range(n), rng.randint(1, n))
        aux = build_aux_graph(g, targets)
        flow, cut = max_flow_value(aux), mincut_brute_oracle(aux)
        if flow != cut:
            failures += 1
            print(f"max-flow mismatch on trial {trial}: flow {flow}, cut {cut}")
    print(f"max-flow vs brute cut: {args.trials - failures}/{args.trials} agree")
    ok = 0
    for seed in range(args.trials):
        g = gen_matching_union(ExpanderSpec(12, 10, seed))
        phi = conductance_brute(g)
        lam = spectral_lower_bound(g)
        ok += lam <= float(phi) + 1e-6
    print(f"spectral bound <= brute conductance: {ok}/{args.trials} (n=12)")
    failures += args.trials - ok
    return EXIT_OK if failures == 0 else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowgap", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (
        ("gen", _cmd_gen, "generate an instance and its BFS layers"),
        ("certify", _cmd_certify, "run the pipeline and write a gap certificate"),
        ("sweep", _cmd_sweep, "run several sizes and seeds and aggregate"),
    ):
        sp = sub.add_parser(name, help=helptext)
        _add_config_flags(sp)
        sp.set_defaults(func=func)
        if name == "sweep":
            sp.add_argument("--ns", help="vertex counts, e.g. 1024,4096")
    sp = sub.add_parser("export", help="export a report from an artifact directory")
    sp.add_argument("dir")
    sp.add_argument("--format", choices=("csv", "dot"), default="csv")
    sp.set_defaults(func=_cmd_export)
    sp = sub.add_parser("oracle", help="cross-check solvers against brute force")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
