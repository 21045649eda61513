"""Graph-based combinatorial complex data model and neighborhood matrices.

A combinatorial complex (CC) here is a fixed node set plus two ordered
families of node subsets: 1-cells (always node pairs, i.e. edges) and
2-cells (subsets of size >= 2 that never coincide with a 1-cell). Cells of
rank >= 3 are deliberately not representable. The canonical on-disk and
in-memory representation of a rank is its co-incidence matrix: one row per
cell, one column per node, entry 1 where the node belongs to the cell.

All types are immutable after construction; the matrix constructors are
pure functions returning dense 0/1 float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "CombinatorialComplex",
    "CoIncidenceMatrix",
    "GraphSeries",
    "CcSeries",
    "validate",
    "co_incidence",
    "from_co_incidence",
    "incidence",
    "adjacency",
    "coadjacency",
    "skeleton",
]


def _canonical_cells(cells) -> tuple[tuple[int, ...], ...]:
    """Sort node indices within each cell and cells lexicographically."""
    return tuple(sorted(tuple(sorted(int(i) for i in cell)) for cell in cells))


def _freeze_features(features) -> np.ndarray | None:
    if features is None:
        return None
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"node features must be 2-D, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..num_nodes-1."""

    num_nodes: int
    edges: frozenset[tuple[int, int]]

    def __init__(self, num_nodes: int, edges) -> None:
        normalized = set()
        for e in edges:
            u, v = e
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ValueError(f"edge ({u},{v}) outside 0..{num_nodes - 1}")
            normalized.add((min(u, v), max(u, v)))
        object.__setattr__(self, "num_nodes", int(num_nodes))
        object.__setattr__(self, "edges", frozenset(normalized))

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> list[int]:
        out = [b if a == u else a for (a, b) in self.edges if u in (a, b)]
        return sorted(out)

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a


@dataclass(frozen=True)
class CombinatorialComplex:
    """Graph-based CC: nodes, 1-cells (pairs) and 2-cells (subsets, size >= 2).

    Construction only canonicalizes ordering (indices sorted within a cell,
    cells sorted lexicographically per rank); it does not reject invalid
    content, so that `validate` can report violations on any instance.
    """

    num_nodes: int
    cells1: tuple[tuple[int, ...], ...]
    cells2: tuple[tuple[int, ...], ...]
    node_features: np.ndarray | None = field(default=None, compare=False)

    def __init__(self, num_nodes: int, cells1=(), cells2=(), node_features=None):
        object.__setattr__(self, "num_nodes", int(num_nodes))
        object.__setattr__(self, "cells1", _canonical_cells(cells1))
        object.__setattr__(self, "cells2", _canonical_cells(cells2))
        object.__setattr__(self, "node_features", _freeze_features(node_features))

    def cells(self, rank: int) -> tuple[tuple[int, ...], ...]:
        if rank == 1:
            return self.cells1
        if rank == 2:
            return self.cells2
        raise ValueError(f"rank must be 1 or 2, got {rank}")

    def num_cells(self, rank: int) -> int:
        return len(self.cells(rank))


@dataclass(frozen=True)
class CoIncidenceMatrix:
    """Sparse binary matrix, one row per cell, one column per node.

    Rows hold strictly increasing node indices; an empty row is allowed and
    stands for an all-zero padding row.
    """

    rows: tuple[tuple[int, ...], ...]
    num_cols: int

    def __init__(self, rows, num_cols: int) -> None:
        frozen = []
        for row in rows:
            row = tuple(int(i) for i in row)
            if any(b <= a for a, b in zip(row, row[1:])):
                raise ValueError(f"row indices must be strictly increasing: {row}")
            if row and (row[0] < 0 or row[-1] >= num_cols):
                raise ValueError(f"row {row} outside 0..{num_cols - 1}")
            frozen.append(row)
        object.__setattr__(self, "rows", tuple(frozen))
        object.__setattr__(self, "num_cols", int(num_cols))

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((len(self.rows), self.num_cols))
        for i, row in enumerate(self.rows):
            dense[i, list(row)] = 1.0
        return dense

    @classmethod
    def from_dense(cls, dense) -> "CoIncidenceMatrix":
        dense = np.asarray(dense)
        rows = [tuple(np.flatnonzero(r).tolist()) for r in dense]
        return cls(rows, dense.shape[1] if dense.ndim == 2 else 0)


@dataclass(frozen=True)
class GraphSeries:
    """Graphs over a shared node set, optionally with per-timestep features."""

    num_nodes: int
    graphs: tuple[Graph, ...]
    features: tuple[np.ndarray, ...] | None = field(default=None, compare=False)

    def __init__(self, num_nodes: int, graphs, features=None) -> None:
        graphs = tuple(graphs)
        if not graphs:
            raise ValueError("a series needs at least one timestep")
        for g in graphs:
            if g.num_nodes != num_nodes:
                raise ValueError("all timesteps must share num_nodes")
        if features is not None:
            features = tuple(_freeze_features(f) for f in features)
            if len(features) != len(graphs):
                raise ValueError("features must cover every timestep")
        object.__setattr__(self, "num_nodes", int(num_nodes))
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "features", features)

    def __len__(self) -> int:
        return len(self.graphs)


@dataclass(frozen=True)
class CcSeries:
    """CCs over a shared node set; features, if any, live on the CCs."""

    num_nodes: int
    ccs: tuple[CombinatorialComplex, ...]

    def __init__(self, num_nodes: int, ccs) -> None:
        ccs = tuple(ccs)
        if not ccs:
            raise ValueError("a series needs at least one timestep")
        for cc in ccs:
            if cc.num_nodes != num_nodes:
                raise ValueError("all timesteps must share num_nodes")
        object.__setattr__(self, "num_nodes", int(num_nodes))
        object.__setattr__(self, "ccs", ccs)

    def __len__(self) -> int:
        return len(self.ccs)


def validate(cc: CombinatorialComplex) -> list[str]:
    """Check CC invariants and return a list of violations (empty if valid)."""
    problems: list[str] = []
    for rank, cells in ((1, cc.cells1), (2, cc.cells2)):
        seen = set()
        for cell in cells:
            if len(cell) == 0:
                problems.append(f"rank-{rank} cell is empty")
                continue
            if len(set(cell)) != len(cell):
                problems.append(
                    f"self-loop / duplicate node in rank-{rank} cell {cell}"
                )
                continue
            if cell[0] < 0 or cell[-1] >= cc.num_nodes:
                problems.append(f"rank-{rank} cell {cell} has out-of-range nodes")
            if cell in seen:
                problems.append(f"duplicate rank-{rank} cell {cell}")
            seen.add(cell)
    for cell in cc.cells1:
        if len(set(cell)) == len(cell) and len(cell) != 2:
            problems.append(f"1-cell {cell} must have exactly 2 nodes")
    cells1_set = set(cc.cells1)
    for cell in cc.cells2:
        if len(cell) < 2:
            problems.append(f"2-cell {cell} must have at least 2 nodes")
        if cell in cells1_set:
            problems.append(f"rank order broken: 2-cell {cell} equals a 1-cell")
    if cc.node_features is not None and cc.node_features.shape[0] != cc.num_nodes:
        problems.append("node feature rows do not match num_nodes")
    return problems


def co_incidence(cc: CombinatorialComplex, rank: int) -> CoIncidenceMatrix:
    """Co-incidence matrix of one rank: rows are cells in canonical order."""
    return CoIncidenceMatrix(cc.cells(rank), cc.num_nodes)


def from_co_incidence(rows1, rows2, num_nodes: int, node_features=None):
    """Rebuild a CC from per-rank co-incidence rows.

    Zero rows are discarded, duplicate rows within a rank are deduplicated,
    and a rank-2 row that coincides with a surviving 1-cell is dropped so
    the result always validates. Rows of cardinality 1 are rejected: a
    single-node cell cannot carry rank 1 or 2.
    """

    def cleaned(rows, rank):
        if isinstance(rows, CoIncidenceMatrix):
            rows = rows.rows
        out = []
        seen = set()
        for row in rows:
            cell = tuple(sorted(int(i) for i in row))
            if len(cell) == 0:
                continue
            if len(cell) == 1:
                raise ValueError(
                    f"rank-{rank} row {cell} has a single node; not a valid cell"
                )
            if cell not in seen:
                seen.add(cell)
                out.append(cell)
        return out

    cells1 = cleaned(rows1, 1)
    cells2 = cleaned(rows2, 2)
    cells1_set = set(cells1)
    cells2 = [c for c in cells2 if c not in cells1_set]
    cc = CombinatorialComplex(num_nodes, cells1, cells2, node_features)
    problems = validate(cc)
    if problems:
        raise ValueError(f"reconstructed CC is invalid: {problems}")
    return cc


def incidence(cc: CombinatorialComplex, r: int, k: int) -> np.ndarray:
    """Incidence matrix between ranks r < k: entry (i,j) is 1 iff the i-th
    rank-r cell is a strict subset of the j-th rank-k cell."""
    if (r, k) == (0, 1):
        lower = [(i,) for i in range(cc.num_nodes)]
        upper = cc.cells1
    elif (r, k) == (1, 2):
        lower = cc.cells1
        upper = cc.cells2
    else:
        raise ValueError(f"(r, k) must be (0,1) or (1,2), got ({r},{k})")
    mat = np.zeros((len(lower), len(upper)))
    upper_sets = [set(c) for c in upper]
    for j, up in enumerate(upper_sets):
        for i, low in enumerate(lower):
            if set(low) < up:
                mat[i, j] = 1.0
    return mat


def adjacency(cc: CombinatorialComplex, r: int, k: int = 1) -> np.ndarray:
    """Adjacency among rank-r cells via shared cells one rank up.

    Entry (i,j) is 1 iff some higher cell strictly contains both cell i and
    cell j; the diagonal is 1 exactly for cells lying in some higher cell.
    """
    if k != 1 or r not in (0, 1):
        raise ValueError(f"(r, k) must be (0,1) or (1,1), got ({r},{k})")
    b = incidence(cc, r, r + 1)
    adj = (b @ b.T > 0).astype(float)
    return adj


def coadjacency(cc: CombinatorialComplex) -> np.ndarray:
    """Coadjacency among 2-cells via shared 1-cells (diagonal included)."""
    b = incidence(cc, 1, 2)
    return (b.T @ b > 0).astype(float)


def skeleton(cc: CombinatorialComplex) -> Graph:
    """The 1-skeleton: nodes plus the 1-cells as edges."""
    return Graph(cc.num_nodes, cc.cells1)
