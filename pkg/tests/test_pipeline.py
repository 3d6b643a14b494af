import csv
import json
from fractions import Fraction
from pathlib import Path

import pytest

from flowgap import cli
from flowgap.graph import Partition, validate_partition
from flowgap.pipeline import (
    EXIT_ERROR,
    EXIT_OK,
    ConfigError,
    RunConfig,
    build_instance,
    export_report,
    make_partition,
    parse_config,
    parse_int_list,
    recompute_ratio,
    run_pipeline,
)

SMALL = "n=1024\nd=10\nseed=3\nuseless_fraction=0.05\n"


def test_parse_config_and_errors():
    cfg = parse_config("# comment\nn=512\nseeds=[1..3]\nlp_oracle=true\ns=auto\n")
    assert cfg.n == 512 and cfg.seeds == (1, 2, 3) and cfg.lp_oracle and cfg.s is None
    with pytest.raises(ConfigError, match="'colour'"):
        parse_config("colour=blue\n")
    with pytest.raises(ConfigError, match="'n'"):
        parse_config("n=many\n")
    with pytest.raises(ConfigError):
        parse_config("partition_source=magic\n")
    with pytest.raises(ConfigError):
        parse_config("just words\n")
    assert parse_int_list("1..3,7") == [1, 2, 3, 7]
    assert parse_config(cfg.to_text()) == cfg


@pytest.mark.parametrize("source", ["pipeline-random", "singleton", "bfs-balls:1", "bfs-balls:0"])
def test_partition_sources_are_valid(source):
    cfg = RunConfig(n=128, seed=2, partition_source=source)
    g = build_instance(cfg).graph
    p = make_partition(cfg, g)
    assert p.n == g.n
    assert validate_partition(g, p) is None


def test_random_partition_cluster_count():
    cfg = RunConfig(n=256, seed=1, clusters=40)
    p = make_partition(cfg, build_instance(cfg).graph)
    assert p.f == 40


def test_minimal_run_writes_artifacts(tmp_path):
    cfg = parse_config("n=1024\nd=10\nseed=7\n")
    assert run_pipeline(cfg, tmp_path) == EXIT_OK
    for name in ("instance.txt", "partition.txt", "demand.txt", "paths.txt", "pairs.txt", "layers.txt", "superedges.txt", "certificate.json"):
        assert (tmp_path / name).exists(), name
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["stop_reason"] == "useless-budget" and not cert["aborted"]


def read_records(path, tag):
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#")[0].split()
        if line and line[0] == tag:
            rows.append(line[1:])
    return rows


def independent_ratio(run):
    """Recompute lower/upper from the files with plain parsing only."""
    edges = [tuple(map(int, r)) for r in read_records(run / "instance.txt", "e")]
    n = int(read_records(run / "instance.txt", "g")[0][0])
    part = {int(v): int(c) for v, c in read_records(run / "partition.txt", "p")}
    demand = [(int(a), int(b), Fraction(x)) for a, b, x in read_records(run / "demand.txt", "d")]
    adj = {v: set() for v in range(n)}
    for u, v, _ in edges:
        adj[u].add(v)
        adj[v].add(u)

    def dist(a, b):
        seen, frontier, k = {a}, {a}, 0
        while b not in seen:
            frontier = {y for x in frontier for y in adj[x]} - seen
            seen |= frontier
            k += 1
        return k

    lower = sum(x * dist(a, b) for a, b, x in demand) / sum(c for _, _, c in edges)
    cap = {}
    for u, v, c in edges:
        key = frozenset((part[u], part[v]))
        if len(key) == 2:
            cap[key] = cap.get(key, 0) + c
    load = {}
    for row in read_records(run / "paths.txt", "q"):
        nodes = list(map(int, row))
        for x, y in zip(nodes, nodes[1:]):
            key = frozenset((x, y))
            load[key] = load.get(key, 0) + 1
    upper = max(Fraction(load[k], cap[k]) for k in load)
    return lower / upper


def test_ratio_recomputed_from_files(tmp_path):
    run_pipeline(parse_config(SMALL), tmp_path)
    cert = json.loads((tmp_path / "certificate.json").read_text())
    embedded = Fraction(cert["ratio"]["num"], cert["ratio"]["den"])
    assert independent_ratio(tmp_path) == embedded
    assert recompute_ratio(tmp_path) == embedded


def test_same_config_same_bytes(tmp_path):
    cfg = parse_config(SMALL)
    run_pipeline(cfg, tmp_path / "a")
    run_pipeline(cfg, tmp_path / "b")
    for name in ("certificate.json", "demand.txt", "paths.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_list_and_csv_export(tmp_path):
    cfg = parse_config(SMALL + "seeds=1..5\n")
    assert run_pipeline(cfg, tmp_path) == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir() if p.is_dir()) == [f"seed-{i}" for i in range(1, 6)]
    with open(tmp_path / "aggregate.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 5
    (out,) = export_report(tmp_path, "csv")
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "seed", "r", "m_achieved", "sum_dist", "lower_g", "upper_h", "ratio", "aborted"]
    assert len(rows) == 6


def test_dot_export(tmp_path):
    run_pipeline(parse_config(SMALL), tmp_path)
    (dot,) = export_report(tmp_path, "dot")
    text = dot.read_text()
    f = len(set(read_records(tmp_path / "partition.txt", "p")[i][1] for i in range(1024)))
    assert text.startswith("graph H {")
    assert text.count("shape=") == f
    assert text.count(" -- ") == len(read_records(tmp_path / "superedges.txt", "s"))
    assert 'label="' in text


def test_export_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        export_report(tmp_path, "csv")


def test_invalid_file_partition_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("".join(f"p {v} 0\n" for v in range(64)))
    code = cli.main(["certify", "--n", "64", "--k", "3", "--m", "4", "--partition-source", f"file:{bad}", "--out", str(tmp_path / "run")])
    assert code == EXIT_ERROR


def test_cli_certify_uses_env_root(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("FLOWGAP_ARTIFACTS", str(tmp_path))
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(SMALL)
    assert cli.main(["certify", "--config", str(cfgfile), "--seed", "4"]) == EXIT_OK
    assert (tmp_path / "n1024-seed4" / "certificate.json").exists()
    assert "ratio=" in capsys.readouterr().out


def test_cli_bad_key_names_it(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("speed=3\n")
    assert cli.main(["certify", "--config", str(cfgfile), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "'speed'" in capsys.readouterr().err


def test_cli_gen_sweep_export_oracle(tmp_path, capsys):
    assert cli.main(["gen", "--n", "128", "--out", str(tmp_path / "g")]) == EXIT_OK
    assert (tmp_path / "g" / "instance.txt").exists()
    code = cli.main(["sweep", "--ns", "1024", "--seeds", "1..2", "--useless-fraction", "0.1", "--out", str(tmp_path / "s")])
    assert code == EXIT_OK
    with open(tmp_path / "s" / "r_trend.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2
    assert cli.main(["export", str(tmp_path / "s"), "--format", "csv"]) == EXIT_OK
    assert cli.main(["oracle", "--trials", "10"]) == EXIT_OK
    assert "agree" in capsys.readouterr().out
