"""Static and temporal graph statistics, DTW, and the series evaluator.

Local statistics (per node, or per eigenvalue for the Laplacian spectrum)
are summarized per timestep by their first and third quartiles
(linear-interpolation quantiles) and compared across two series with
multidimensional dynamic time warping; global statistics are compared with
one-dimensional DTW; the temporal correlation is a single scalar per
series and is compared by absolute difference.

Conventions for degenerate cases are pinned here because the bare formulas
do not cover them: closeness on a disconnected graph uses the
per-component form scaled by (reachable-1)/(n-1) (0 for isolated nodes),
clustering of a node with degree < 2 is 0, transitivity of a graph with no
connected triple is 0, zero-variance degree series contribute 0 to the
temporal correlation, and the "paths available up to time t" statistics
read edges from the cumulative union of all timesteps up to t.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .cc import Graph, GraphSeries

__all__ = [
    "degree",
    "degree_centrality",
    "local_clustering",
    "closeness_centrality",
    "EigenvectorCentrality",
    "eigenvector_centrality",
    "laplacian_spectrum",
    "average_clustering",
    "transitivity",
    "temporal_correlation",
    "temporal_closeness",
    "temporal_clustering",
    "dtw",
    "StatSeries",
    "EvalReport",
    "evaluate",
]


def degree(g: Graph) -> np.ndarray:
    return g.adjacency_matrix().sum(axis=1)


def degree_centrality(g: Graph) -> np.ndarray:
    if g.num_nodes < 2:
        raise ValueError("degree centrality needs at least 2 nodes")
    return degree(g) / (g.num_nodes - 1)


def local_clustering(g: Graph) -> np.ndarray:
    """Fraction of a node's neighbor pairs that are themselves connected;
    nodes of degree < 2 get 0."""
    a = g.adjacency_matrix()
    k = a.sum(axis=1)
    closed = np.diagonal(a @ a @ a)
    out = np.zeros(g.num_nodes)
    mask = k >= 2
    out[mask] = closed[mask] / (k[mask] * (k[mask] - 1.0))
    return out


def _bfs_distances(adjacency_sets, start: int, n: int) -> np.ndarray:
    dist = np.full(n, -1)
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency_sets[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _adjacency_sets(g: Graph) -> list[set[int]]:
    sets = [set() for _ in range(g.num_nodes)]
    for u, v in g.edges:
        sets[u].add(v)
        sets[v].add(u)
    return sets


def closeness_centrality(g: Graph) -> np.ndarray:
    """(n-1) over the summed shortest-path distances, restricted to the
    node's component and scaled by (reachable-1)/(n-1)."""
    n = g.num_nodes
    sets = _adjacency_sets(g)
    out = np.zeros(n)
    for i in range(n):
        dist = _bfs_distances(sets, i, n)
        reachable = dist >= 0
        r = int(reachable.sum())  # includes the node itself
        total = dist[reachable].sum()
        if r > 1 and total > 0:
            out[i] = ((r - 1) / (n - 1)) * ((r - 1) / total)
    return out


@dataclass(frozen=True)
class EigenvectorCentrality:
    values: np.ndarray
    converged: bool


def eigenvector_centrality(
    g: Graph, tol: float = 1e-10, max_iters: int = 10_000
) -> EigenvectorCentrality:
    """Principal eigenvector of the adjacency matrix by power iteration.

    Iterates on A + I, which has the same eigenvectors but a strictly
    dominant top eigenvalue, so bipartite graphs cannot oscillate. The
    result is normalized to unit length with non-negative orientation; a
    run that fails to converge is flagged.
    """
    n = g.num_nodes
    shifted = g.adjacency_matrix() + np.eye(n)
    x = np.ones(n) / np.sqrt(n)
    converged = False
    for _ in range(max_iters):
        y = shifted @ x
        y /= np.linalg.norm(y)
        if np.max(np.abs(y - x)) < tol:
            x = y
            converged = True
            break
        x = y
    if x.sum() < 0:
        x = -x
    return EigenvectorCentrality(x, converged)


def laplacian_spectrum(g: Graph) -> np.ndarray:
    """Eigenvalues of D - A in ascending order."""
    a = g.adjacency_matrix()
    lap = np.diag(a.sum(axis=1)) - a
    return np.linalg.eigvalsh(lap)


def average_clustering(g: Graph) -> float:
    return float(local_clustering(g).mean()) if g.num_nodes else 0.0


def transitivity(g: Graph) -> float:
    """3 * triangles / connected triples; 0 when there are no triples."""
    a = g.adjacency_matrix()
    k = a.sum(axis=1)
    triples = float((k * (k - 1.0)).sum() / 2.0)
    if triples == 0.0:
        return 0.0
    triangles = float(np.trace(a @ a @ a)) / 6.0
    return 3.0 * triangles / triples


def temporal_correlation(series: GraphSeries) -> float:
    """Mean Pearson correlation between the degree time series of all node
    pairs; zero-variance series contribute 0."""
    if len(series) < 2:
        raise ValueError("temporal correlation needs at least 2 timesteps")
    n = series.num_nodes
    if n < 2:
        return 0.0
    degrees = np.stack([degree(g) for g in series.graphs])  # T x n
    centered = degrees - degrees.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    total, pairs = 0.0, 0
    for i in range(n):
        for j in range(i + 1, n):
            pairs += 1
            if norms[i] > 0 and norms[j] > 0:
                total += float(centered[:, i] @ centered[:, j]) / (norms[i] * norms[j])
    return total / pairs


def _union_graph(series: GraphSeries, t: int) -> Graph:
    edges = set()
    for g in series.graphs[: t + 1]:
        edges |= g.edges
    return Graph(series.num_nodes, edges)


def temporal_closeness(series: GraphSeries, t: int) -> np.ndarray:
    """Closeness on the union of all edges seen up to time t."""
    return closeness_centrality(_union_graph(series, t))


def temporal_clustering(series: GraphSeries, t: int) -> np.ndarray:
    """Clustering of each node's time-t neighborhood, counting neighbor
    pairs connected anywhere in the cumulative union up to t."""
    current = _adjacency_sets(series.graphs[t])
    union_edges = _union_graph(series, t).edges
    out = np.zeros(series.num_nodes)
    for i in range(series.num_nodes):
        neigh = sorted(current[i])
        k = len(neigh)
        if k < 2:
            continue
        closed = sum(
            1
            for a in range(k)
            for b in range(a + 1, k)
            if (min(neigh[a], neigh[b]), max(neigh[a], neigh[b])) in union_edges
        )
        out[i] = 2.0 * closed / (k * (k - 1.0))
    return out


def dtw(a: np.ndarray, b: np.ndarray) -> float:
    """Classic dynamic time warping with Euclidean local distance, no
    window, endpoints matched to endpoints."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"payload dimensions differ: {a.shape} vs {b.shape}")
    n, m = a.shape[0], b.shape[0]
    local = np.zeros((n, m))
    for i in range(n):
        local[i] = np.linalg.norm(b - a[i], axis=1)
    acc = np.full((n, m), np.inf)
    acc[0, 0] = local[0, 0]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            if i > 0 and j > 0:
                best = min(best, acc[i - 1, j - 1])
            acc[i, j] = local[i, j] + best
    return float(acc[n - 1, m - 1])


@dataclass(frozen=True)
class StatSeries:
    """Per-timestep payloads of one statistic: scalars, or (Q1, Q3) pairs."""

    name: str
    values: np.ndarray  # T x d

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class EvalReport:
    entries: dict

    def rows(self) -> list[tuple[str, float]]:
        return [(name, self.entries[name]) for name in sorted(self.entries)]


_LOCAL_STATS = {
    "degree": degree,
    "degree_centrality": degree_centrality,
    "local_clustering": local_clustering,
    "closeness_centrality": closeness_centrality,
    "eigenvector_centrality": lambda g: eigenvector_centrality(g).values,
    "laplacian_spectrum": laplacian_spectrum,
}

_GLOBAL_STATS = {
    "average_clustering": average_clustering,
    "transitivity": transitivity,
}

_TEMPORAL_LOCAL_STATS = {
    "temporal_closeness": temporal_closeness,
    "temporal_clustering": temporal_clustering,
}


def _quartile_series(name: str, per_step_values) -> StatSeries:
    rows = [np.quantile(v, [0.25, 0.75]) for v in per_step_values]
    return StatSeries(name, np.stack(rows))


def stat_series(series: GraphSeries) -> dict[str, StatSeries]:
    """All comparable statistic series for one graph series."""
    out: dict[str, StatSeries] = {}
    for name, fn in _LOCAL_STATS.items():
        out[name] = _quartile_series(name, [fn(g) for g in series.graphs])
    for name, fn in _TEMPORAL_LOCAL_STATS.items():
        out[name] = _quartile_series(
            name, [fn(series, t) for t in range(len(series))]
        )
    for name, fn in _GLOBAL_STATS.items():
        out[name] = StatSeries(name, np.array([[fn(g)] for g in series.graphs]))
    return out


def evaluate(generated: GraphSeries, target: GraphSeries) -> EvalReport:
    """DTW distances between the two series' statistics plus the absolute
    difference of their temporal-correlation scalars."""
    if generated.num_nodes != target.num_nodes:
        raise ValueError("series must share the node count")
    gen_stats = stat_series(generated)
    tgt_stats = stat_series(target)
    entries = {
        name: dtw(gen_stats[name].values, tgt_stats[name].values)
        for name in gen_stats
    }
    entries["temporal_correlation"] = abs(
        temporal_correlation(generated) - temporal_correlation(target)
    )
    return EvalReport(entries)
