"""Clique lifting: graphs and graph series into graph-based CCs.

A lift keeps the nodes and edges and adds every clique of the graph with
size between ``min_clique_size`` and ``max_clique_size`` (all cliques, not
only maximal ones) as a 2-cell. Enumeration runs pivoted Bron-Kerbosch over
maximal cliques and then expands sub-cliques under the size cap, which
avoids scanning all node subsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .cc import CcSeries, CombinatorialComplex, Graph, GraphSeries

__all__ = ["LiftConfig", "enumerate_cliques", "clique_lift", "lift_series"]

DEFAULT_MAX_CLIQUE_SIZE = 15


@dataclass(frozen=True)
class LiftConfig:
    min_clique_size: int = 3
    max_clique_size: int = DEFAULT_MAX_CLIQUE_SIZE

    def __post_init__(self) -> None:
        if not 3 <= self.min_clique_size <= self.max_clique_size:
            raise ValueError("need 3 <= min_clique_size <= max_clique_size")


def _maximal_cliques(adj: dict[int, set[int]]) -> list[frozenset[int]]:
    """Pivoted Bron-Kerbosch over an adjacency-set dict."""
    out: list[frozenset[int]] = []

    def expand(r: set[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            out.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(adj), set())
    return out


def enumerate_cliques(g: Graph, cfg: LiftConfig = LiftConfig()) -> list[tuple[int, ...]]:
    """All cliques of g with min <= size <= max, in canonical order."""
    adj = {u: set() for u in range(g.num_nodes)}
    for u, v in g.edges:
        adj[u].add(v)
        adj[v].add(u)
    cliques: set[tuple[int, ...]] = set()
    for maximal in _maximal_cliques(adj):
        members = sorted(maximal)
        top = min(cfg.max_clique_size, len(members))
        for size in range(cfg.min_clique_size, top + 1):
            for sub in combinations(members, size):
                cliques.add(sub)
    return sorted(cliques)


def clique_lift(g: Graph, cfg: LiftConfig = LiftConfig(), node_features=None):
    """Lift a graph to a CC: edges become 1-cells, cliques become 2-cells."""
    return CombinatorialComplex(
        g.num_nodes, g.edge_list(), enumerate_cliques(g, cfg), node_features
    )


def lift_series(gs: GraphSeries, cfg: LiftConfig = LiftConfig()) -> CcSeries:
    """Lift every timestep; node features are carried through unchanged."""
    ccs = []
    for t, g in enumerate(gs.graphs):
        feat = None if gs.features is None else gs.features[t]
        ccs.append(clique_lift(g, cfg, feat))
    return CcSeries(gs.num_nodes, ccs)
