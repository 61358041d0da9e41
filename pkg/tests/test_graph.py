from __future__ import annotations

import networkx as nx
import numpy as np
import pytest

from subcount import generators as gen
from subcount.graph import (Graph, GraphInvariantError, brute_force_triangle_count, degeneracy,
                            degree_order_rank, edge_degree, exact_triangle_count, vertex_precedes)


def to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges.tolist())
    return h


def test_canonical_edges_and_csr():
    g = Graph(4, [(2, 1), (0, 3), (1, 0)])
    assert g.edges.tolist() == [[0, 1], [0, 3], [1, 2]]
    assert g.m == 3
    assert g.neighbors(0).tolist() == [1, 3]
    assert g.neighbors(1).tolist() == [0, 2]
    assert g.degrees.sum() == 2 * g.m


@pytest.mark.parametrize("edges, msg", [
    ([(0, 0)], "self-loop"),
    ([(0, 1), (1, 0)], "duplicate"),
    ([(0, 5)], "out of range"),
])
def test_invariant_violations_raise(edges, msg):
    with pytest.raises(GraphInvariantError, match=msg):
        Graph(3, edges)


def test_from_pairs_dedupes():
    g = Graph.from_pairs(3, [(0, 1), (1, 0), (1, 2), (1, 2)])
    assert g.m == 2


def test_has_edge_and_edge_index():
    g = gen.clique(5)
    assert g.has_edge(4, 0) and not g.has_edge(2, 2)
    p = gen.path(4)
    assert p.edge_index([0, 2, 0], [1, 1, 3]).tolist() == [0, 1, -1]
    assert p.has_edges([0, 0], [1, 2]).tolist() == [True, False]


def test_edge_degree_examples():
    # degrees 3 and 5
    g = Graph.from_pairs(8, [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (1, 6), (1, 7)])
    assert edge_degree(g, 0, 1) == 3
    s = gen.star(10)
    assert edge_degree(s, 0, 7) == 1
    with pytest.raises(GraphInvariantError):
        edge_degree(s, 1, 2)


def test_vertex_order_ties_by_id():
    assert vertex_precedes(3, 5, 4, 1)
    assert vertex_precedes(4, 1, 4, 2)
    assert not vertex_precedes(4, 2, 4, 1)
    g = gen.star(5)
    rank = degree_order_rank(g)
    assert rank[0] == 4 and sorted(rank[1:]) == [0, 1, 2, 3]


def test_clique_counts():
    t, per_edge = exact_triangle_count(gen.clique(4), per_edge=True)
    assert t == 4
    assert per_edge.tolist() == [2] * 6


def test_bipartite_has_no_triangles():
    g = gen.regular_bipartite(20, 4)
    t, per_edge = exact_triangle_count(g, per_edge=True)
    assert t == 0 and not per_edge.any()


@pytest.mark.parametrize("seed", range(5))
def test_triangle_count_matches_networkx_and_brute_force(seed):
    g = gen.erdos_renyi(40, 0.2, seed=seed)
    t, per_edge = exact_triangle_count(g, per_edge=True)
    assert t == brute_force_triangle_count(g)
    assert t == sum(nx.triangles(to_nx(g)).values()) // 3
    assert per_edge.sum() == 3 * t
    # per-edge counts from common neighbourhoods
    h = to_nx(g)
    expect = [len(set(h[u]) & set(h[v])) for u, v in g.edges.tolist()]
    assert per_edge.tolist() == expect


def test_third_vertices_list_common_neighbours():
    g = gen.clique(5)
    eid = int(g.edge_index([1], [3])[0])
    assert g.third_vertices(eid).tolist() == [0, 2, 4]
    ptr, third, via_u, via_v = g.third_vertex_csr
    for j in range(ptr[eid], ptr[eid + 1]):
        assert g.edges[via_u[j]].tolist() == sorted([1, int(third[j])])
        assert g.edges[via_v[j]].tolist() == sorted([3, int(third[j])])


def test_degeneracy_examples():
    assert degeneracy(gen.forest_union(200, 1, seed=3)) == 1
    assert degeneracy(gen.clique(7)) == 6
    assert degeneracy(Graph(5)) == 0


@pytest.mark.parametrize("alpha", [2, 3, 5])
def test_degeneracy_sandwich_on_forest_unions(alpha):
    g = gen.forest_union(300, alpha, seed=alpha)
    d = degeneracy(g)
    # Nash-Williams density bound from below, forest cover from above
    assert -(-g.m // (g.n - 1)) <= d <= 2 * alpha - 1
    assert d == max(nx.core_number(to_nx(g)).values())


def test_chiba_nishizeki_bound():
    g, _ = gen.planted_clique(gen.forest_union(200, 3, seed=1), 12, seed=2)
    assert g.edge_degrees().sum() <= 2 * g.m * degeneracy(g)
