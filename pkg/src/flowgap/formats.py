"""Line-oriented text formats for graphs, partitions, demands and audit files.

Every format is UTF-8, one record per line, ``#`` starts a comment.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .graph import CapacitatedGraph, Demand, Edge, GraphError, Partition


class FormatError(ValueError):
    def __init__(self, path: str | Path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def _records(path: str | Path) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _ints(path, lineno, fields: Sequence[str]) -> list[int]:
    try:
        return [int(x) for x in fields]
    except ValueError:
        raise FormatError(path, lineno, f"expected integers, got {' '.join(fields)!r}") from None


def load_graph(path: str | Path) -> CapacitatedGraph:
    header = None
    terminals: list[int] = []
    edges: list[Edge] = []
    for lineno, rec in _records(path):
        tag = rec[0]
        if tag == "g":
            if header is not None or len(rec) != 4:
                raise FormatError(path, lineno, "bad or repeated header")
            header = _ints(path, lineno, rec[1:])
            continue
        if header is None:
            raise FormatError(path, lineno, "record before header")
        n = header[0]
        if tag == "t" and len(rec) == 2:
            (t,) = _ints(path, lineno, rec[1:])
            if not 0 <= t < n:
                raise FormatError(path, lineno, f"terminal {t} out of range")
            if t in terminals:
                raise FormatError(path, lineno, f"duplicate terminal {t}")
            terminals.append(t)
        elif tag == "e" and len(rec) == 4:
            u, v, cap = _ints(path, lineno, rec[1:])
            if u == v:
                raise FormatError(path, lineno, f"self-loop at {u}")
            if cap < 0:
                raise FormatError(path, lineno, f"negative capacity {cap}")
            if not (0 <= u < n and 0 <= v < n):
                raise FormatError(path, lineno, "endpoint out of range")
            edges.append(Edge(len(edges), u, v, cap))
        else:
            raise FormatError(path, lineno, f"malformed record {' '.join(rec)!r}")
    if header is None:
        raise FormatError(path, 0, "missing header")
    n, m, k = header
    if len(edges) != m or len(terminals) != k:
        raise FormatError(path, 0, f"header says m={m} k={k}, found m={len(edges)} k={len(terminals)}")
    return CapacitatedGraph(n, tuple(edges), tuple(terminals))


def format_graph(g: CapacitatedGraph) -> str:
    lines = [f"g {g.n} {g.m} {g.k}"]
    lines += [f"t {t}" for t in g.terminals]
    lines += [f"e {e.u} {e.v} {e.cap}" for e in sorted(g.edges, key=lambda e: e.id)]
    return "\n".join(lines) + "\n"


def _write(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def save_graph(g: CapacitatedGraph, path: str | Path) -> None:
    _write(path, format_graph(g))


def load_partition(path: str | Path, n: int | None = None) -> Partition:
    labels: dict[int, int] = {}
    for lineno, rec in _records(path):
        if rec[0] != "p" or len(rec) != 3:
            raise FormatError(path, lineno, f"malformed record {' '.join(rec)!r}")
        v, c = _ints(path, lineno, rec[1:])
        if v in labels:
            raise FormatError(path, lineno, f"vertex {v} assigned twice")
        labels[v] = c
    size = n if n is not None else len(labels)
    if sorted(labels) != list(range(size)):
        raise FormatError(path, 0, f"partition does not cover vertices 0..{size - 1}")
    try:
        return Partition(tuple(labels[v] for v in range(size)))
    except GraphError as exc:
        raise FormatError(path, 0, str(exc)) from None


def format_partition(p: Partition) -> str:
    return "".join(f"p {v} {c}\n" for v, c in enumerate(p.assignment))


def save_partition(p: Partition, path: str | Path) -> None:
    _write(path, format_partition(p))


def load_demand(path: str | Path) -> Demand:
    entries: dict[tuple[int, int], Fraction] = {}
    for lineno, rec in _records(path):
        if rec[0] != "d" or len(rec) != 4:
            raise FormatError(path, lineno, f"malformed record {' '.join(rec)!r}")
        a, b = _ints(path, lineno, rec[1:3])
        try:
            val = Fraction(rec[3])
        except (ValueError, ZeroDivisionError):
            raise FormatError(path, lineno, f"bad rational {rec[3]!r}") from None
        if a == b:
            raise FormatError(path, lineno, f"self-pair {a}")
        key = (min(a, b), max(a, b))
        entries[key] = entries.get(key, Fraction(0)) + val
    return Demand(entries)


def format_demand(d: Demand) -> str:
    return "".join(f"d {a} {b} {v.numerator}/{v.denominator}\n" for (a, b), v in d.items())


def save_demand(d: Demand, path: str | Path) -> None:
    _write(path, format_demand(d))


def save_layers(layers: Sequence[int], path: str | Path) -> None:
    _write(path, "".join(f"l {v} {lay}\n" for v, lay in enumerate(layers)))


def load_layers(path: str | Path) -> list[int]:
    out: dict[int, int] = {}
    for lineno, rec in _records(path):
        if rec[0] != "l" or len(rec) != 3:
            raise FormatError(path, lineno, f"malformed record {' '.join(rec)!r}")
        v, lay = _ints(path, lineno, rec[1:])
        out[v] = lay
    return [out[v] for v in range(len(out))]


def save_paths(paths: Iterable[Sequence[int]], path: str | Path) -> None:
    _write(path, "".join("q " + " ".join(map(str, p)) + "\n" for p in paths))


def load_paths(path: str | Path) -> list[list[int]]:
    return [_ints(path, lineno, rec[1:]) for lineno, rec in _records(path) if rec[0] == "q"]


def save_pairs(rows: Iterable[tuple[int, int, int, int]], path: str | Path) -> None:
    _write(path, "".join(f"pair {a} {b} {t} {t2}\n" for a, b, t, t2 in rows))


def load_pairs(path: str | Path) -> list[tuple[int, int, int, int]]:
    out = []
    for lineno, rec in _records(path):
        if rec[0] != "pair" or len(rec) != 5:
            raise FormatError(path, lineno, f"malformed record {' '.join(rec)!r}")
        out.append(tuple(_ints(path, lineno, rec[1:])))
    return out


def save_superedges(rows: Iterable[tuple[int, int, int, int | Fraction, Fraction]], path: str | Path) -> None:
    """Superedge load table, ``s <id> <a> <b> <cap> <load>``."""
    lines = []
    for sid, a, b, cap, load in rows:
        load = Fraction(load)
        lines.append(f"s {sid} {a} {b} {cap} {load.numerator}/{load.denominator}\n")
    _write(path, "".join(lines))


def load_superedges(path: str | Path) -> list[tuple[int, int, int, Fraction, Fraction]]:
    out = []
    for lineno, rec in _records(path):
        if rec[0] != "s" or len(rec) != 6:
            raise FormatError(path, lineno, f"malformed record {' '.join(rec)!r}")
        sid, a, b = _ints(path, lineno, rec[1:4])
        out.append((sid, a, b, Fraction(rec[4]), Fraction(rec[5])))
    return out
