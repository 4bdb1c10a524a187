import math

import networkx as nx
import numpy as np
import pytest

from perclab.errors import GraphError, GraphSizeError, InfeasibleGraphError, NotBipartiteError
from perclab.graphs import (GraphKind, cartesian_product, check_expansion_condition, complete, cycle,
                            distance_shell, distances_from, from_edges, hypercube, popcount, random_regular,
                            read_graph, write_graph)
from perclab.settings import Settings


def as_networkx(g):
    lo, hi = g.edge_arrays()
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(zip(lo.tolist(), hi.tolist()))
    return h


def test_hypercube_neighbors_of_origin(q3):
    assert sorted(q3.neighbors(0).tolist()) == [1, 2, 4]


def test_hypercube_dimension_one_is_single_edge():
    g = hypercube(1)
    assert (g.n, g.d, g.m) == (2, 1, 1)
    assert g.edge_endpoints(0) == (0, 1)


def test_hypercube_edge_count():
    assert hypercube(10).m == 5120


@pytest.mark.parametrize('d', [0, 31, -2])
def test_hypercube_dimension_out_of_range(d):
    with pytest.raises(GraphError):
        hypercube(d)


def test_hypercube_size_guard():
    with pytest.raises(GraphSizeError):
        hypercube(12, settings=Settings(max_implicit_order=1024))


@pytest.mark.parametrize('d', [1, 4, 7])
def test_hypercube_edge_ids_are_a_bijection(d):
    g = hypercube(d)
    lo, hi = g.edge_arrays()
    assert np.all(lo < hi)
    x = lo ^ hi
    assert np.all((x & (x - 1)) == 0)
    assert len(set(zip(lo.tolist(), hi.tolist()))) == g.m
    for e in range(0, g.m, max(1, g.m // 50)):
        u, v = g.edge_endpoints(e)
        assert g.edge_id(u, v) == e == g.edge_id(v, u)


def test_hypercube_slot_matches_incident_edges(q6):
    for v in (0, 5, 63):
        nbrs, eids = q6.neighbors(v), q6.incident_edges(v)
        for u, e in zip(nbrs.tolist(), eids.tolist()):
            assert set(q6.edge_endpoints(e)) == {u, v}


def test_neighbor_table_matches_networkx(q6):
    nbr, _ = q6.neighbor_table()
    h = nx.hypercube_graph(6)
    # networkx labels vertices by bit tuples, most significant first
    index = {node: int(''.join(map(str, node)), 2) for node in h}
    for node in h:
        assert sorted(nbr[index[node]].tolist()) == sorted(index[x] for x in h[node])


def test_edge_id_rejects_non_edge(q3):
    with pytest.raises(GraphError):
        q3.edge_id(0, 3)


def test_random_regular_four_three_is_k4():
    g = random_regular(4, 3, seed=0)
    assert nx.is_isomorphic(as_networkx(g), nx.complete_graph(4))


def test_random_regular_is_simple_and_regular():
    g = random_regular(10, 3, seed=7)
    assert np.all(g.degree_audit() == 3)
    lo, hi = g.edge_arrays()
    assert np.all(lo < hi)
    assert len(set(zip(lo.tolist(), hi.tolist()))) == g.m == 15


def test_random_regular_is_deterministic():
    a, b = random_regular(50, 4, seed=3), random_regular(50, 4, seed=3)
    assert np.array_equal(a.edge_arrays()[0], b.edge_arrays()[0])
    assert np.array_equal(a.edge_arrays()[1], b.edge_arrays()[1])


def test_random_regular_large_passes_degree_audit():
    g = random_regular(1000, 20, seed=1)
    assert g.m == 10000
    assert np.all(g.degree_audit() == 20)
    assert all(d == 20 for _, d in as_networkx(g).degree)


@pytest.mark.parametrize('n, d', [(5, 3), (4, 4), (3, 5)])
def test_random_regular_infeasible(n, d):
    with pytest.raises(InfeasibleGraphError):
        random_regular(n, d, seed=0)


def test_from_edges_rejects_irregular_and_multi_edges():
    with pytest.raises(GraphError):
        from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(GraphError):
        from_edges(2, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        from_edges(2, [(0, 0), (1, 1)])


def test_product_of_k2_copies_is_labelled_like_hypercube():
    g = cartesian_product([complete(2)] * 5)
    q = hypercube(5)
    assert g.kind == GraphKind.PRODUCT and g.d == 5
    for v in range(g.n):
        assert sorted(g.neighbors(v).tolist()) == sorted(q.neighbors(v).tolist())


def test_product_matches_networkx():
    g = cartesian_product([cycle(3), cycle(4), complete(3)])
    assert (g.n, g.d) == (36, 6)
    expected = nx.cartesian_product(nx.cartesian_product(nx.cycle_graph(3), nx.cycle_graph(4)), nx.complete_graph(3))
    assert nx.is_isomorphic(as_networkx(g), expected)


def test_product_size_guard():
    with pytest.raises(GraphSizeError):
        cartesian_product([cycle(50), cycle(50)], settings=Settings(max_explicit_order=1000))


@pytest.mark.parametrize('k', range(0, 6))
def test_hypercube_shell_size(k):
    shell = distance_shell(hypercube(8), 37, k)
    assert shell.size == math.comb(8, k)
    assert all(bin(int(u) ^ 37).count('1') == k for u in shell)


def test_shell_and_distances_on_explicit_host():
    g = random_regular(60, 4, seed=11)
    lengths = nx.single_source_shortest_path_length(as_networkx(g), 5, cutoff=3)
    for k in range(4):
        assert distance_shell(g, 5, k).tolist() == sorted(v for v, dist in lengths.items() if dist == k)
    dist = distances_from(g, 5, 3)
    for v, length in lengths.items():
        assert dist[v] == length


def test_expansion_statistic_on_complete_graph():
    d = 6
    report = check_expansion_condition(complete(d + 1), [0, 3])
    assert report.radius == 1
    assert report.global_max == d
    assert not report.passes(d - 1)


def test_expansion_statistic_on_hypercube_equals_radius():
    report = check_expansion_condition(hypercube(8), [0, 100], radius=2)
    for (v, k), stat in report.per_vertex.items():
        assert stat == k
    assert report.max_for_radius(2) == 2


def test_expansion_needs_sample():
    with pytest.raises(GraphError):
        check_expansion_condition(hypercube(4), [])


def test_graph_file_round_trip(tmp_path):
    g = random_regular(30, 3, seed=2)
    path = tmp_path / 'g.txt'
    write_graph(g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == '30 3' and len(lines) == 1 + 45
    h = read_graph(path)
    assert np.array_equal(h.edge_arrays()[0], g.edge_arrays()[0])
    assert np.array_equal(h.edge_arrays()[1], g.edge_arrays()[1])


@pytest.mark.parametrize('text', ['', '4 3\n0 1\n', '3 2\n0 1\n2 1\n0 2\n', '3 2\n0 x\n1 2\n0 2\n'])
def test_read_graph_rejects_malformed(tmp_path, text):
    path = tmp_path / 'bad.txt'
    path.write_text(text)
    with pytest.raises(GraphError):
        read_graph(path)


def test_bipartition():
    side = hypercube(5).bipartition()
    assert np.array_equal(side, np.array([bin(v).count('1') % 2 for v in range(32)]))
    assert cycle(6).is_bipartite()
    with pytest.raises(NotBipartiteError):
        cycle(5).bipartition()
    assert not complete(4).is_bipartite()


def test_product_of_k2_copies_is_isomorphic_to_hypercube():
    g = cartesian_product([complete(2)] * 6)
    expected = nx.convert_node_labels_to_integers(nx.hypercube_graph(6))
    assert nx.is_isomorphic(as_networkx(g), expected)


@pytest.mark.parametrize('d', range(1, 11))
def test_hypercube_layers_step_forward_and_back(d):
    g = hypercube(d)
    nbr, _ = g.neighbor_table()
    for v in range(g.n):
        dist = distances_from(g, v, d)
        around = dist[nbr]
        assert np.array_equal((around == dist[:, None] + 1).sum(axis=1), d - dist)
        assert np.array_equal((around == dist[:, None] - 1).sum(axis=1), dist)


def _assert_shells(g, centres):
    for v in centres:
        for k in range(g.d + 1):
            shell = distance_shell(g, v, k)
            assert shell.size == math.comb(g.d, k)
            assert np.all(popcount(shell ^ v) == k)


@pytest.mark.parametrize('d', range(1, 13))
def test_hypercube_shell_cardinality(d):
    g = hypercube(d)
    _assert_shells(g, range(g.n) if d <= 8 else range(0, g.n, 61))


@pytest.mark.slow
@pytest.mark.parametrize('d', [11, 12])
def test_hypercube_shell_cardinality_every_centre(d):
    g = hypercube(d)
    _assert_shells(g, range(g.n))


def test_shell_cardinality_on_explicit_cube():
    g = cartesian_product([complete(2)] * 7)
    for v in (0, 45, 127):
        assert [distance_shell(g, v, k).size for k in range(8)] == [math.comb(7, k) for k in range(8)]


def test_expansion_statistic_on_torus_product():
    g = cartesian_product([cycle(4)] * 4)
    assert (g.n, g.d) == (256, 8)
    report = check_expansion_condition(g, [0, 37, 200, 255])
    assert report.radius == 2
    for k in (1, 2):
        assert report.max_for_radius(k) <= 2 * k
    assert report.passes(4)
