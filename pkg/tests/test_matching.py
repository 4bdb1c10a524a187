import itertools
import logging
import math

import networkx as nx
import numpy as np
import pytest

from perclab.bounds import TheoremConstants
from perclab.errors import ComponentTooLargeError, NotBipartiteError
from perclab.graphs import cartesian_product, complete, cycle, hypercube, random_regular
from perclab.matching import (MatchingResult, coverage_report, exhaustive_component_sizes, has_augmenting_path,
                              high_degree_cut, karp_sipser, max_matching_bipartite, max_matching_exhaustive,
                              misra_gries_color, theorem1_matching, verify_coloring, verify_matching,
                              write_matching)
from perclab.percolation import isolated_count, sample
from perclab.settings import Settings


def _brute_force_cut(s, min_degree):
    high = {v for v in range(s.n) if s.degrees[v] >= min_degree}
    lo, hi = s.host.edge_arrays(s.kept_ids)
    e0 = [e for e, u, v in zip(s.kept_ids.tolist(), lo.tolist(), hi.tolist()) if u in high or v in high]
    return sorted(high), e0


def test_high_degree_cut_empty_sample(q10):
    cut = high_degree_cut(sample(q10, 0, seed=0), TheoremConstants(0.1, 0.3, 3, 3.0))
    assert cut.V0.size == 0 and cut.E0.size == 0


def test_high_degree_cut_threshold_above_degree(q10):
    cut = high_degree_cut(sample(q10, 1, seed=0), TheoremConstants(0.1, 0.3, 12, 12.0))
    assert cut.min_degree == 16
    assert cut.V0.size == 0 and cut.E0.size == 0


def test_high_degree_cut_matches_brute_force(q10):
    s = sample(q10, '0.7', seed=5)
    cut = high_degree_cut(s, TheoremConstants(0.1, 0.3, 6, 6.0))
    assert cut.threshold == pytest.approx(7.8) and cut.min_degree == 8
    V0, E0 = _brute_force_cut(s, 8)
    assert cut.V0.tolist() == V0
    assert cut.E0.tolist() == E0
    assert np.all(s.degrees[np.setdiff1d(np.arange(s.n), cut.V0)] < cut.threshold)


@pytest.mark.slow
def test_high_degree_cut_full_degree_on_q16():
    s = sample(hypercube(16), '12/16', seed=0)
    cut = high_degree_cut(s, TheoremConstants(0.1, 0.3, 12, 12.0))
    assert cut.min_degree == 16
    V0, E0 = _brute_force_cut(s, 16)
    assert cut.V0.tolist() == V0 == np.flatnonzero(s.degrees == 16).tolist()
    assert cut.E0.tolist() == E0


def test_coloring_two_edges_sharing_a_vertex(make_sample):
    g = cycle(4)
    s = make_sample(g, range(g.m))
    c = misra_gries_color(s, [0, 1, 2])
    assert len(c.color) == 2 and c.num_colors == 2
    assert verify_coloring(c, s, [0, 1, 2]).ok


def test_coloring_triangle(make_sample):
    g = complete(3)
    s = make_sample(g, range(g.m))
    c = misra_gries_color(s)
    assert c.num_colors == 3 and c.max_degree == 2
    assert verify_coloring(c, s).ok


def test_coloring_full_hypercube():
    s = sample(hypercube(8), 1, seed=0)
    c = misra_gries_color(s)
    verdict = verify_coloring(c, s)
    assert verdict.proper and verdict.complete and verdict.conflicts == []
    assert 8 <= c.num_colors <= 9
    assert len(c.color) == 1024


def test_coloring_empty_sample(q10):
    c = misra_gries_color(sample(q10, 0, seed=0))
    assert c.color == {} and c.num_colors == 0


def test_verify_coloring_detects_conflict(make_sample, k4):
    s = make_sample(k4, range(k4.m))
    c = misra_gries_color(s)
    e, f = k4.edge_id(0, 1), k4.edge_id(0, 2)
    c.color[f] = c.color[e]
    verdict = verify_coloring(c, s)
    assert not verdict.proper and 0 in verdict.conflicts


def _coloring_campaign(runs):
    hosts = {d: hypercube(d) for d in (6, 8, 10)}
    hosts.update({d: random_regular(120, d, seed=d) for d in (5, 9, 14)})
    for seed, (d, p) in zip(range(runs), itertools.cycle(itertools.product(hosts, (0.3, 0.6, 0.9)))):
        yield sample(hosts[d], str(p), seed)


@pytest.mark.parametrize('runs', [30, pytest.param(500, marks=pytest.mark.slow)])
def test_coloring_within_vizing_bound(runs):
    for s in _coloring_campaign(runs):
        c = misra_gries_color(s)
        assert verify_coloring(c, s).ok
        assert c.num_colors <= c.max_degree + 1


def test_theorem1_empty_sample(q10):
    m = theorem1_matching(sample(q10, 0, seed=0), 0.1)
    assert m.size == 0 and m.guarantee == 0


def test_theorem1_full_small_hypercube(caplog):
    s = sample(hypercube(4), 1, seed=0)
    with caplog.at_level(logging.WARNING):
        m = theorem1_matching(s, 0.1)
    assert 'outside the regime' in caplog.text
    assert m.metadata['V0'] == 0 and m.metadata['E_H'] == 32
    assert m.guarantee == 2 * math.ceil(32 / m.metadata['num_colors'])
    assert m.covered >= m.guarantee >= 14
    assert verify_matching(m, s).ok


def test_theorem1_with_explicit_constants(q10):
    s = sample(q10, '0.7', seed=2)
    consts = TheoremConstants(0.1, 0.3, 6, 6.0)
    m = theorem1_matching(s, 0.1, consts)
    cut = high_degree_cut(s, consts)
    assert m.metadata['V0'] == cut.V0.size and m.metadata['E0'] == cut.E0.size
    V0 = set(cut.V0.tolist())
    for e in m.edges:
        assert not V0 & set(s.host.edge_endpoints(e))
    assert m.covered >= m.guarantee


@pytest.mark.parametrize('runs', [30, pytest.param(200, marks=pytest.mark.slow)])
def test_theorem1_pigeonhole_guarantee(runs):
    for s in _coloring_campaign(runs):
        m = theorem1_matching(s, 0.1)
        assert verify_matching(m, s).ok
        assert m.covered >= m.guarantee == 2 * math.ceil(m.metadata['E_H'] / max(1, m.metadata['num_colors']))


def test_karp_sipser_star(make_sample, k4):
    s = make_sample(k4, [k4.edge_id(0, x) for x in (1, 2, 3)])
    m = karp_sipser(s)
    assert m.size == 1 and verify_matching(m, s).ok


def test_karp_sipser_path(make_sample, k4):
    s = make_sample(k4, [k4.edge_id(0, 1), k4.edge_id(1, 2), k4.edge_id(2, 3)])
    m = karp_sipser(s)
    assert m.size == 2
    assert m.metadata['random_steps'] == 0


def test_karp_sipser_is_seeded(q10):
    s = sample(q10, '0.7', seed=3)
    assert karp_sipser(s).edges == karp_sipser(s, seed=3).edges
    assert karp_sipser(s, seed=11).edges == karp_sipser(s, seed=11).edges
    assert karp_sipser(sample(q10, 0, seed=0)).size == 0


def test_karp_sipser_close_to_maximum(q10):
    ratios = []
    for seed in range(10):
        s = sample(q10, '0.7', seed)
        ks, exact = karp_sipser(s), max_matching_bipartite(s)
        assert verify_matching(ks, s).ok
        assert ks.size <= exact.size
        ratios.append(ks.size / exact.size)
    assert min(ratios) >= 0.95


@pytest.mark.parametrize('d', [2, 5, 8])
def test_exact_full_hypercube_is_perfect(d):
    m = max_matching_bipartite(sample(hypercube(d), 1, seed=0))
    assert m.covered == 2 ** d
    assert m.metadata['certified']


def test_exact_empty_sample(q10):
    assert max_matching_bipartite(sample(q10, 0, seed=0)).size == 0


def test_exact_needs_bipartite_host(c5):
    with pytest.raises(NotBipartiteError):
        max_matching_bipartite(sample(c5, 1, seed=0))


@pytest.mark.parametrize('p', ['0.2', '0.4', '0.7'])
def test_exact_matches_networkx(q10, to_networkx, p):
    side = q10.bipartition()
    for seed in range(5):
        s = sample(q10, p, seed)
        h = to_networkx(s)
        top = [v for v in range(s.n) if side[v] == 0]
        expected = len(nx.bipartite.hopcroft_karp_matching(h, top_nodes=top)) // 2
        m = max_matching_bipartite(s)
        assert m.size == expected
        assert m.metadata['certified'] and verify_matching(m, s).ok


def test_exact_on_bipartite_product(to_networkx):
    g = cartesian_product([cycle(4), cycle(6)])
    s = sample(g, '0.6', seed=4)
    m = max_matching_bipartite(s)
    assert m.size == len(nx.max_weight_matching(to_networkx(s), maxcardinality=True))


def test_augmenting_path_detection(make_sample):
    g = cycle(6)
    s = make_sample(g, range(g.m))
    perfect = MatchingResult(frozenset([g.edge_id(0, 1), g.edge_id(2, 3), g.edge_id(4, 5)]), 'exact')
    assert not has_augmenting_path(perfect, s)
    single = MatchingResult(frozenset([g.edge_id(1, 2)]), 'exact')
    assert has_augmenting_path(single, s)


def test_exhaustive_small_graphs(make_sample):
    for g, expected in [(complete(4), 2), (complete(5), 2), (cycle(5), 2), (cycle(7), 3)]:
        s = make_sample(g, range(g.m))
        m = max_matching_exhaustive(s)
        assert m.size == expected and verify_matching(m, s).ok


def test_exhaustive_agrees_with_exact(q10):
    compared = 0
    for seed in range(10):
        s = sample(q10, '1/20', seed)
        if max(exhaustive_component_sizes(s), default=0) > 20:
            continue
        assert max_matching_exhaustive(s).size == max_matching_bipartite(s).size
        compared += 1
    assert compared > 0


def test_exhaustive_agrees_with_networkx_on_random_regular(to_networkx):
    g = random_regular(200, 3, seed=1)
    compared = 0
    for seed in range(10):
        s = sample(g, '0.3', seed)
        if max(exhaustive_component_sizes(s), default=0) > 24:
            continue
        m = max_matching_exhaustive(s, settings=Settings(exhaustive_component_limit=24))
        assert m.size == len(nx.max_weight_matching(to_networkx(s), maxcardinality=True))
        compared += 1
    assert compared > 0


def test_exhaustive_component_limit(q10):
    with pytest.raises(ComponentTooLargeError):
        max_matching_exhaustive(sample(q10, 1, seed=0))


def test_verify_matching_negatives(q3, make_sample):
    s = make_sample(q3, [q3.edge_id(0, 1), q3.edge_id(0, 2)])
    assert not verify_matching(MatchingResult(frozenset([q3.edge_id(0, 1), q3.edge_id(0, 2)]), 'x'), s).disjoint
    verdict = verify_matching(MatchingResult(frozenset([q3.edge_id(2, 3)]), 'x'), s)
    assert not verdict.within_sample and verdict.bad_edges == [q3.edge_id(2, 3)]


def test_coverage_report():
    r = coverage_report(61000, 65536, 0.1)
    assert r.covered_fraction == pytest.approx(0.9308, abs=1e-4)
    assert r.uncovered == 4536 and r.meets_target
    assert coverage_report(0, 100, 0.1).covered_fraction == 0
    full = coverage_report(100, 100, 0.01)
    assert full.covered_fraction == 1 and full.meets_target


@pytest.mark.parametrize('p', ['0.4', '0.7'])
def test_oracle_sandwich(q10, p):
    for seed in range(10):
        s = sample(q10, p, seed)
        exact = max_matching_bipartite(s)
        assert karp_sipser(s).size <= exact.size
        assert theorem1_matching(s, 0.1).covered <= exact.covered
        assert s.n - exact.covered >= isolated_count(s)


@pytest.mark.slow
@pytest.mark.parametrize('p', ['0.4', '0.7'])
def test_oracle_sandwich_campaign(q10, p):
    for seed in range(100):
        s = sample(q10, p, seed)
        exact = max_matching_bipartite(s)
        assert karp_sipser(s).size <= exact.size
        assert theorem1_matching(s, 0.1).covered <= exact.covered


@pytest.mark.slow
def test_theorem1_sandwich_on_q16():
    g = hypercube(16)
    for seed in range(50):
        s = sample(g, '0.75', seed)
        m = theorem1_matching(s, 0.1)
        assert m.guarantee <= m.covered <= max_matching_bipartite(s).covered


def test_write_matching(tmp_path, q3, make_sample):
    s = make_sample(q3, range(q3.m))
    m = max_matching_bipartite(s)
    path = tmp_path / 'm.txt'
    write_matching(m, s, path, oracle_size=4)
    lines = path.read_text().splitlines()
    pairs = [tuple(map(int, line.split())) for line in lines[:4]]
    assert sorted(q3.edge_id(u, v) for u, v in pairs) == sorted(m.edges)
    assert lines[4:] == ['# algorithm exact', '# covered 8', '# guarantee -', '# oracle_gap 0']
