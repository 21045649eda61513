import numpy as np
import pytest

from dyncc.cc import CombinatorialComplex, Graph


def rng_for(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


def random_graph(rng, num_nodes: int, edge_prob: float = 0.4) -> Graph:
    edges = [
        (u, v)
        for u in range(num_nodes)
        for v in range(u + 1, num_nodes)
        if rng.random() < edge_prob
    ]
    return Graph(num_nodes, edges)


def random_cc(rng, num_nodes: int) -> CombinatorialComplex:
    """Random valid CC: random edges plus random 2-cells of size >= 2 that
    never coincide with a 1-cell as a set."""
    g = random_graph(rng, num_nodes)
    cells1 = set(g.edge_list())
    cells2 = set()
    for _ in range(int(rng.integers(0, 5))):
        size = int(rng.integers(2, min(num_nodes, 5) + 1))
        cell = tuple(sorted(rng.choice(num_nodes, size=size, replace=False).tolist()))
        if cell not in cells1:
            cells2.add(cell)
    return CombinatorialComplex(num_nodes, sorted(cells1), sorted(cells2))


@pytest.fixture
def rng():
    return rng_for(1234)
