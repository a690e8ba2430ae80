import numpy as np
import pytest

from conftest import complete_graph, cycle_graph
from oracles import brute_triangles, random_graph
from topoclasp.errors import ContractError
from topoclasp.filtration import quantile_thresholds, sublevel_filtration, triangles
from topoclasp.graphs import Graph


def test_quantile_examples():
    np.testing.assert_array_equal(quantile_thresholds([1, 2, 3, 4], 2), [2.5, 4])
    np.testing.assert_array_equal(quantile_thresholds([7, 7, 7], 5), [7])
    np.testing.assert_array_equal(quantile_thresholds([0, 10], 1), [10])


def test_quantile_properties(rng):
    for _ in range(100):
        vals = rng.integers(0, 5, size=int(rng.integers(1, 15))) * rng.random()
        n = int(rng.integers(1, 12))
        th = quantile_thresholds(vals, n)
        assert 1 <= len(th) <= n
        assert np.all(np.diff(th) > 0)
        assert th[-1] == vals.max()


def test_quantile_errors():
    with pytest.raises(ContractError):
        quantile_thresholds([], 3)
    with pytest.raises(ContractError):
        quantile_thresholds([1.0], 0)


def test_triangle_example():
    f = sublevel_filtration(complete_graph(3), [1, 2, 3], [1, 2, 3])
    assert f.vertices == [(0, 1.0), (1, 2.0), (2, 3.0)]
    assert f.edges == [(0, 1, 2.0), (0, 2, 3.0), (1, 2, 3.0)]
    assert f.triangles == [(0, 1, 2, 3.0)]


def test_c4_constant():
    f = sublevel_filtration(cycle_graph(4), np.zeros(4), [0.0])
    assert all(v == 0 for _, v in f.vertices) and len(f.vertices) == 4
    assert all(e[2] == 0 for e in f.edges) and len(f.edges) == 4
    assert f.triangles == []


def test_single_node():
    f = sublevel_filtration(Graph.from_edges(1, []), [5.0], [5.0])
    assert f.vertices == [(0, 5.0)] and f.edges == [] and f.triangles == []


def test_simplices_above_top_threshold_excluded():
    f = sublevel_filtration(complete_graph(3), [1, 2, 3], [1, 2])
    assert [v for v, _ in f.vertices] == [0, 1]
    assert f.edges == [(0, 1, 2.0)] and f.triangles == []


def test_rejects_wrong_value_count():
    with pytest.raises(ContractError):
        sublevel_filtration(complete_graph(3), [1, 2], [2])


def test_invariants_on_random_graphs(rng):
    for _ in range(60):
        n = int(rng.integers(1, 13))
        g = random_graph(rng, n, rng.choice([0.2, 0.4, 0.6]))
        vals = rng.integers(0, 4, size=n).astype(float)
        th = quantile_thresholds(vals, int(rng.integers(1, 6)))
        f = sublevel_filtration(g, vals, th)
        vv = dict(f.vertices)
        ev = {(u, v): x for u, v, x in f.edges}
        for u, v, x in f.edges:
            assert x == max(vals[u], vals[v]) and u in vv and v in vv
        for a, b, c, x in f.triangles:
            assert x == max(vals[[a, b, c]])
            for e in ((a, b), (a, c), (b, c)):
                assert e in ev and ev[e] <= x
        # face before coface in the total order
        order = {s: i for i, (s, _) in enumerate(f.simplices())}
        for s in order:
            if len(s) > 1:
                for drop in range(len(s)):
                    assert order[s[:drop] + s[drop + 1:]] < order[s]
        # nestedness
        for lo, hi in zip(th[:-1], th[1:]):
            small, big = f.at(lo).simplices(), f.at(hi).simplices()
            assert {s for s, _ in small} <= {s for s, _ in big}
        assert len(f.triangles) == len(brute_triangles(g))


def test_clique_enumeration_matches_brute_force(rng):
    for _ in range(50):
        g = random_graph(rng, int(rng.integers(3, 13)), rng.choice([0.3, 0.6, 0.9]))
        assert triangles(g) == brute_triangles(g)
