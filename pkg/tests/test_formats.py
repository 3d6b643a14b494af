from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowgap.formats import (
    FormatError,
    format_graph,
    load_demand,
    load_graph,
    load_layers,
    load_pairs,
    load_partition,
    load_paths,
    load_superedges,
    save_demand,
    save_graph,
    save_layers,
    save_pairs,
    save_partition,
    save_paths,
    save_superedges,
)
from flowgap.graph import CapacitatedGraph, Demand, Partition


def write(tmp_path, text):
    path = tmp_path / "f.txt"
    path.write_text(text)
    return path


def test_graph_round_trip(tmp_path):
    g = CapacitatedGraph.from_edges(4, [(0, 1, 3), (1, 2, 1), (0, 1, 2)], terminals=[3, 0])
    save_graph(g, tmp_path / "g.txt")
    assert load_graph(tmp_path / "g.txt") == g
    assert format_graph(g).startswith("g 4 3 2\nt 3\nt 0\n")


def test_comments_and_blank_lines(tmp_path):
    path = write(tmp_path, "# header\ng 2 1 1\n\nt 0  # terminal\ne 0 1 1\n")
    assert load_graph(path).m == 1


@pytest.mark.parametrize(
    "text, line",
    [
        ("g 2 1 0\ne 0 0 1\n", 2),
        ("g 2 0 2\nt 0\nt 0\n", 3),
        ("g 2 1 0\ne 0 1 -3\n", 2),
        ("g 2 1 0\ne 0 7 1\n", 2),
        ("g 2 1 0\nx 1\n", 2),
        ("e 0 1 1\n", 1),
    ],
)
def test_graph_errors_carry_line_numbers(tmp_path, text, line):
    with pytest.raises(FormatError) as info:
        load_graph(write(tmp_path, text))
    assert info.value.lineno == line


def test_header_count_mismatch(tmp_path):
    with pytest.raises(FormatError):
        load_graph(write(tmp_path, "g 3 2 0\ne 0 1 1\n"))


def test_partition_round_trip_and_gaps(tmp_path):
    p = Partition((0, 1, 1, 2))
    save_partition(p, tmp_path / "p.txt")
    assert load_partition(tmp_path / "p.txt") == p
    with pytest.raises(FormatError):
        load_partition(write(tmp_path, "p 0 0\np 2 0\n"))
    with pytest.raises(FormatError):
        load_partition(write(tmp_path, "p 0 0\np 0 1\n"))


def test_demand_round_trip(tmp_path):
    d = Demand({(0, 3): Fraction(5, 3), (1, 2): 2})
    save_demand(d, tmp_path / "d.txt")
    assert load_demand(tmp_path / "d.txt") == d
    with pytest.raises(FormatError):
        load_demand(write(tmp_path, "d 1 1 1\n"))
    with pytest.raises(FormatError):
        load_demand(write(tmp_path, "d 0 1 1/0\n"))


def test_audit_files_round_trip(tmp_path):
    save_layers([0, 1, 1, 2], tmp_path / "l.txt")
    assert load_layers(tmp_path / "l.txt") == [0, 1, 1, 2]
    save_paths([(0, 1, 2), (3,)], tmp_path / "q.txt")
    assert load_paths(tmp_path / "q.txt") == [[0, 1, 2], [3]]
    save_pairs([(1, 2, 0, 3)], tmp_path / "pp.txt")
    assert load_pairs(tmp_path / "pp.txt") == [(1, 2, 0, 3)]
    save_superedges([(0, 0, 1, 4, Fraction(3))], tmp_path / "s.txt")
    assert load_superedges(tmp_path / "s.txt") == [(0, 0, 1, Fraction(4), Fraction(3))]


@given(
    st.integers(2, 10).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(0, 9)), max_size=20),
            st.sets(st.integers(0, n - 1), max_size=n),
        )
    )
)
@settings(max_examples=60, deadline=None)
def test_graph_round_trip_property(tmp_path_factory, data):
    n, pairs, terms = data
    g = CapacitatedGraph.from_edges(n, [p for p in pairs if p[0] != p[1]], sorted(terms))
    path = tmp_path_factory.mktemp("rt") / "g.txt"
    save_graph(g, path)
    assert load_graph(path) == g
