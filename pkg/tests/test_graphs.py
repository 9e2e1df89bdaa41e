import io as _io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclespace import io
from cyclespace.graphs import (
    Graph,
    cycle_space_cardinality,
    edge_index,
    is_cycle_space_member,
    num_pairs,
    odd_vertices,
    project_to_cycle_space,
    xor_add,
)
from oracles import all_graphs, even_degrees


def graphs(max_n=7):
    return st.integers(1, max_n).flatmap(
        lambda n: st.integers(0, (1 << num_pairs(n)) - 1).map(lambda b: Graph(n, b))
    )


def test_edge_index_examples():
    assert edge_index(0, 1, 4) == 0
    assert edge_index(2, 3, 4) == 5
    assert edge_index(1, 3, 4) == 4


@pytest.mark.parametrize("n", range(2, 9))
def test_edge_index_bijective(n):
    idx = [edge_index(i, j, n) for i in range(n) for j in range(i + 1, n)]
    assert idx == list(range(num_pairs(n)))


@pytest.mark.parametrize("args", [(1, 1, 4), (2, 1, 4), (0, 4, 4), (-1, 2, 4)])
def test_edge_index_rejects(args):
    with pytest.raises(ValueError):
        edge_index(*args)


def test_xor_examples():
    e01 = Graph.from_edges(3, [(0, 1)])
    assert xor_add(e01, e01) == Graph.empty(3)
    a = Graph.from_edges(4, [(0, 1), (0, 2), (1, 2)])
    b = Graph.from_edges(4, [(0, 1), (0, 3), (1, 3)])
    assert set(xor_add(a, b).edges()) == {(0, 2), (1, 2), (0, 3), (1, 3)}
    assert xor_add(a, Graph.empty(4)) == a


def test_xor_mismatched_n():
    with pytest.raises(ValueError):
        xor_add(Graph.empty(3), Graph.empty(4))


@given(graphs())
def test_self_inverse_and_handshake(g):
    assert (g ^ g).bits == 0
    assert sum(g.degrees()) % 2 == 0
    assert sum(g.degrees()) == 2 * g.num_edges


def test_membership_examples():
    assert is_cycle_space_member(Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)]))
    assert not is_cycle_space_member(Graph.from_edges(3, [(0, 1)]))
    assert is_cycle_space_member(Graph.empty(5))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_cardinality_matches_veblen(n):
    count = sum(1 for g in all_graphs(n) if even_degrees(g))
    assert count == cycle_space_cardinality(n) == 2 ** ((n - 1) * (n - 2) // 2)
    assert all(is_cycle_space_member(g) == even_degrees(g) for g in all_graphs(n))


def test_cardinality_examples():
    assert cycle_space_cardinality(4) == 8
    assert cycle_space_cardinality(3) == 2


@pytest.mark.parametrize("n", [3, 4, 5])
def test_closure_exhaustive(n):
    members = [g for g in all_graphs(n) if even_degrees(g)]
    for g in members:
        for h in members:
            assert is_cycle_space_member(g ^ h)


def test_projection_examples():
    path = Graph.from_edges(3, [(0, 1), (1, 2)])
    proj, d = project_to_cycle_space(path)
    assert d == 1 and proj == Graph.complete(3)
    tri = Graph.complete(3)
    assert project_to_cycle_space(tri) == (tri, 0)
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    proj, d = project_to_cycle_space(star)
    assert d == 2 and is_cycle_space_member(proj)
    # pairing (v_i, v_{k/2+i}) of the sorted odd vertices 0,1,2,3 flips 02 and 13
    assert proj == star ^ Graph.from_edges(4, [(0, 2), (1, 3)])


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_projection_optimal_exhaustive(n):
    members = [g.bits for g in all_graphs(n) if even_degrees(g)]
    for g in all_graphs(n):
        proj, d = project_to_cycle_space(g)
        assert is_cycle_space_member(proj)
        assert (proj.bits ^ g.bits).bit_count() == d == len(odd_vertices(g)) // 2
        assert min((m ^ g.bits).bit_count() for m in members) == d


@given(graphs(10))
@settings(max_examples=200)
def test_projection_distance_property(g):
    proj, d = project_to_cycle_space(g)
    assert is_cycle_space_member(proj)
    assert (proj ^ g).num_edges == d == len(odd_vertices(g)) // 2


@given(graphs(9))
def test_serialization_round_trips(g):
    buf = _io.StringIO()
    np.savetxt(buf, g.to_adjacency(), fmt="%d", delimiter=",")
    buf.seek(0)
    assert io.read_adjacency_csv(buf) == g
    n, edges = io.parse_edge_list(io.format_edge_list(g.n, g.edges()))
    assert Graph.from_edges(n, edges) == g
    assert Graph.from_bitstring(g.n, g.bitstring()) == g


def test_file_round_trip(tmp_path):
    g = Graph.from_edges(5, [(0, 1), (1, 4), (2, 3)])
    io.write_adjacency_csv(g, tmp_path / "a.csv")
    io.write_edge_list(g, tmp_path / "a.txt")
    assert io.read_graph(tmp_path / "a.csv") == g
    assert io.read_graph(tmp_path / "a.txt") == g
    assert (tmp_path / "a.txt").read_text() == "# n=5\n0 1\n1 4\n2 3\n"
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "0,1,0,0,0"


def test_from_adjacency_validates():
    with pytest.raises(ValueError):
        Graph.from_adjacency(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        Graph.from_adjacency(np.array([[1, 0], [0, 0]]))


def test_graph_rejects_bad_bits():
    with pytest.raises(ValueError):
        Graph(3, 1 << 3)


def test_numpy_integer_inputs_are_coerced():
    g = Graph.from_edges(20, [(np.int64(18), np.int64(19))])
    assert type(g.bits) is int
    assert g.edges() == [(18, 19)]
    assert type(Graph(np.int64(4), np.int64(3)).bits) is int
