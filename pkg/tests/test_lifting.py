from itertools import combinations

import pytest

from dyncc.cc import Graph, skeleton, validate
from dyncc.lifting import LiftConfig, clique_lift, enumerate_cliques, lift_series
from dyncc.cc import GraphSeries
from conftest import random_graph, rng_for
from test_cc_core import EXAMPLE_EDGES


def brute_force_cliques(g: Graph, lo: int, hi: int):
    """Independent oracle: scan every node subset for completeness."""
    edges = g.edges
    out = []
    for size in range(lo, min(hi, g.num_nodes) + 1):
        for sub in combinations(range(g.num_nodes), size):
            if all((a, b) in edges for a, b in combinations(sub, 2)):
                out.append(sub)
    return sorted(out)


class TestEnumerateCliques:
    def test_example_graph_triangles(self):
        g = Graph(10, EXAMPLE_EDGES)
        got = enumerate_cliques(g)
        assert got == [(1, 2, 6), (1, 6, 7), (1, 7, 8)]
        assert got == brute_force_cliques(g, 3, 10)

    def test_k4(self):
        g = Graph(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
        got = enumerate_cliques(g)
        assert len([c for c in got if len(c) == 3]) == 4
        assert len([c for c in got if len(c) == 4]) == 1
        assert got == brute_force_cliques(g, 3, 15)

    def test_triangle_free(self):
        g = Graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        assert enumerate_cliques(g) == []

    def test_matches_brute_force_on_random_graphs(self):
        rng = rng_for(21)
        for _ in range(30):
            g = random_graph(rng, int(rng.integers(3, 10)), 0.5)
            assert enumerate_cliques(g) == brute_force_cliques(g, 3, 15)

    def test_size_cap_respected(self):
        g = Graph(5, [(a, b) for a in range(5) for b in range(a + 1, 5)])
        cfg = LiftConfig(3, 4)
        assert all(len(c) <= 4 for c in enumerate_cliques(g, cfg))
        assert enumerate_cliques(g, cfg) == brute_force_cliques(g, 3, 4)

    def test_config_invariant(self):
        with pytest.raises(ValueError):
            LiftConfig(2, 15)
        with pytest.raises(ValueError):
            LiftConfig(5, 4)


class TestCliqueLift:
    def test_example_graph(self):
        cc = clique_lift(Graph(10, EXAMPLE_EDGES))
        assert len(cc.cells1) == 11
        assert cc.cells2 == ((1, 2, 6), (1, 6, 7), (1, 7, 8))

    def test_edgeless_graph(self):
        cc = clique_lift(Graph(5, []))
        assert cc.cells1 == () and cc.cells2 == ()

    def test_lift_validates_and_round_trips(self):
        rng = rng_for(22)
        for _ in range(50):
            g = random_graph(rng, int(rng.integers(2, 12)))
            cc = clique_lift(g)
            assert validate(cc) == []
            assert skeleton(cc) == g

    def test_every_2_cell_induces_complete_subgraph(self):
        rng = rng_for(23)
        for _ in range(20):
            g = random_graph(rng, 9, 0.5)
            cc = clique_lift(g)
            for cell in cc.cells2:
                assert all(
                    (a, b) in g.edges for a, b in combinations(sorted(cell), 2)
                )

    def test_monotone_under_edge_addition(self):
        rng = rng_for(24)
        for _ in range(20):
            g = random_graph(rng, 8, 0.4)
            before = set(enumerate_cliques(g))
            non_edges = [
                (a, b)
                for a in range(8)
                for b in range(a + 1, 8)
                if (a, b) not in g.edges
            ]
            if not non_edges:
                continue
            extra = non_edges[int(rng.integers(len(non_edges)))]
            bigger = Graph(8, list(g.edges) + [extra])
            assert before <= set(enumerate_cliques(bigger))


class TestLiftSeries:
    def test_length_and_features_preserved(self):
        rng = rng_for(25)
        graphs = [random_graph(rng, 5) for _ in range(4)]
        feats = [rng.random((5, 2)) for _ in range(4)]
        gs = GraphSeries(5, graphs, feats)
        cs = lift_series(gs)
        assert len(cs) == 4
        for t in range(4):
            assert skeleton(cs.ccs[t]) == graphs[t]
            assert (cs.ccs[t].node_features == feats[t]).all()

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            GraphSeries(5, [])
