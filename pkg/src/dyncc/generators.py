"""Synthetic temporal-network generators and the constrained random baseline.

All randomness flows through numpy's PCG64 generator so every artifact is a
deterministic function of its parameters and seed. Dataset splits derive
per-series seeds from the master seed via ``SeedSequence.spawn``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cc import (
    CcSeries,
    CoIncidenceMatrix,
    CombinatorialComplex,
    Graph,
    GraphSeries,
    co_incidence,
    from_co_incidence,
)

__all__ = [
    "CommunityDecayParams",
    "BaParams",
    "RandomBaselineParams",
    "gen_community_decay",
    "gen_ba",
    "gen_dataset",
    "random_co_incidence",
    "random_prediction",
    "ingest_covid",
]

log = logging.getLogger(__name__)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class CommunityDecayParams:
    """One decaying community whose internal edges migrate outward."""

    timesteps: int = 40
    num_communities: int = 3
    nodes_per_community: int = 15
    p_internal: float = 0.9
    p_external: float = 0.01
    decay_fraction: float = 0.3
    decay_community: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        for p in (self.p_internal, self.p_external, self.decay_fraction):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities and decay_fraction must be in [0,1]")
        if not 0 <= self.decay_community < self.num_communities:
            raise ValueError("decay_community out of range")


@dataclass(frozen=True)
class BaParams:
    """Preferential-attachment growth on a fixed node set."""

    n: int
    m: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.m < self.n:
            raise ValueError("need 1 <= m < n")


@dataclass(frozen=True)
class RandomBaselineParams:
    """Row-cardinality bounds for the random co-incidence baseline."""

    rank1_min: int = 2
    rank1_max: int = 2
    rank2_min: int = 3
    rank2_max: int = 15
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.rank1_min <= self.rank1_max:
            raise ValueError("need 0 < rank1_min <= rank1_max")
        if not 0 < self.rank2_min <= self.rank2_max:
            raise ValueError("need 0 < rank2_min <= rank2_max")


def gen_community_decay(p: CommunityDecayParams) -> GraphSeries:
    """Erdos-Renyi-style communities; each step replaces a fraction of the
    decay community's internal edges with edges to external nodes.

    The edge count is conserved: every removal is paired with one addition,
    and a removal with no eligible external endpoint is skipped (with a
    warning) rather than breaking conservation.
    """
    rng = _rng(p.seed)
    n = p.num_communities * p.nodes_per_community
    community = np.arange(n) // p.nodes_per_community

    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            prob = p.p_internal if community[u] == community[v] else p.p_external
            if rng.random() < prob:
                edges.add((u, v))

    graphs = [Graph(n, edges)]
    decay = p.decay_community
    for _ in range(1, p.timesteps):
        internal = sorted(
            e for e in edges if community[e[0]] == decay and community[e[1]] == decay
        )
        n_replace = math.ceil(p.decay_fraction * len(internal))
        if n_replace:
            chosen = rng.choice(len(internal), size=n_replace, replace=False)
            for idx in sorted(chosen):
                u, v = internal[idx]
                keep = u if rng.random() < 0.5 else v
                eligible = [
                    k
                    for k in range(n)
                    if community[k] != decay
                    and (min(keep, k), max(keep, k)) not in edges
                ]
                if not eligible:
                    log.warning(
                        "no external node available for %s; keeping the edge", (u, v)
                    )
                    continue
                k = eligible[rng.integers(len(eligible))]
                edges.remove((u, v))
                edges.add((min(keep, k), max(keep, k)))
        graphs.append(Graph(n, edges))
    return GraphSeries(n, graphs)


def _weighted_distinct(rng, candidates, weights, count) -> list[int]:
    """Sample `count` distinct candidates, each draw proportional to weight
    among the not-yet-chosen (uniform fallback when all weights are zero)."""
    remaining = list(candidates)
    weights = [float(w) for w in weights]
    picked = []
    for _ in range(count):
        total = sum(weights)
        if total <= 0.0:
            j = int(rng.integers(len(remaining)))
        else:
            r = rng.random() * total
            acc = 0.0
            j = len(remaining) - 1
            for i, w in enumerate(weights):
                acc += w
                if r < acc:
                    j = i
                    break
        picked.append(remaining.pop(j))
        weights.pop(j)
    return picked


def gen_ba(p: BaParams) -> GraphSeries:
    """Barabasi-Albert growth: timestep 0 is the complete graph on the first
    m nodes; each step attaches one new node to m distinct existing nodes
    with probability proportional to degree. Length is n - m."""
    rng = _rng(p.seed)
    edges = {(u, v) for u in range(p.m) for v in range(u + 1, p.m)}
    degree = [0] * p.n
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    graphs = [Graph(p.n, edges)]
    arrived = p.m
    for _ in range(1, p.n - p.m):
        new = arrived
        targets = _weighted_distinct(rng, range(arrived), degree[:arrived], p.m)
        for t in targets:
            edges.add((min(new, t), max(new, t)))
            degree[t] += 1
            degree[new] += 1
        arrived += 1
        graphs.append(Graph(p.n, edges))
    return GraphSeries(p.n, graphs)


def gen_dataset(kind: str, count: int, split: tuple[int, int, int], seed: int, **kw):
    """Generate `count` independent series and split them train/val/test.

    Per-series seeds are spawned from the master seed, so the result is a
    deterministic function of (kind, count, split, seed, params).
    """
    if sum(split) != count:
        raise ValueError(f"split {split} must sum to count {count}")
    children = np.random.SeedSequence(seed).spawn(count)
    series = []
    for child in children:
        child_seed = child.generate_state(1)[0]
        if kind == "ba":
            series.append(gen_ba(BaParams(kw.get("n", 50), kw.get("m", 4), child_seed)))
        elif kind == "tiny-ba":
            series.append(gen_ba(BaParams(kw.get("n", 6), kw.get("m", 1), child_seed)))
        elif kind == "community-decay":
            params = CommunityDecayParams(
                timesteps=kw.get("timesteps", 40),
                num_communities=kw.get("num_communities", 3),
                nodes_per_community=kw.get("nodes_per_community", 15),
                p_internal=kw.get("p_internal", 0.9),
                p_external=kw.get("p_external", 0.01),
                decay_fraction=kw.get("decay_fraction", 0.3),
                decay_community=kw.get("decay_community", 0),
                seed=child_seed,
            )
            series.append(gen_community_decay(params))
        else:
            raise ValueError(f"unknown dataset kind {kind!r}")
    n_train, n_val, _ = split
    return {
        "train": series[:n_train],
        "val": series[n_train : n_train + n_val],
        "test": series[n_train + n_val :],
    }


def random_co_incidence(
    num_rows: int, num_cols: int, lo: int, hi: int, rng: np.random.Generator
) -> CoIncidenceMatrix:
    """Random matrix whose row cardinalities are uniform over {0} u [lo, hi];
    the chosen number of ones is placed uniformly at random in each row."""
    if hi > num_cols and num_rows > 0:
        raise ValueError(f"max cardinality {hi} exceeds {num_cols} columns")
    allowed = [0] + list(range(lo, hi + 1))
    rows = []
    for _ in range(num_rows):
        n_ones = allowed[rng.integers(len(allowed))]
        cols = rng.choice(num_cols, size=n_ones, replace=False)
        rows.append(tuple(sorted(int(c) for c in cols)))
    return CoIncidenceMatrix(rows, num_cols)


def random_prediction(
    target: CcSeries, p: RandomBaselineParams = RandomBaselineParams()
) -> CcSeries:
    """Random baseline: per timestep, draw co-incidence matrices with the
    target's dimensions under the cardinality law, then rebuild CCs (zero
    rows discarded, duplicates deduplicated)."""
    rng = _rng(p.seed)
    ccs = []
    for cc in target.ccs:
        rows1 = random_co_incidence(
            cc.num_cells(1), cc.num_nodes, p.rank1_min, p.rank1_max, rng
        )
        rows2 = random_co_incidence(
            cc.num_cells(2), cc.num_nodes, p.rank2_min, p.rank2_max, rng
        )
        ccs.append(from_co_incidence(rows1, rows2, cc.num_nodes))
    return CcSeries(target.num_nodes, ccs)


def ingest_covid(edges_path, cases_path, window: int = 8) -> GraphSeries:
    """Build a graph series with case-count features from raw files.

    ``edges_path``: JSON ``{"num_nodes": N, "days": [[[u,v], ...], ...]}``;
    day lists may be directed and may contain self-loops, both of which are
    normalized away. ``cases_path``: CSV of day rows with one case-count
    column per region (an optional non-numeric header row is skipped).
    Features of day t are the counts of days t-window+1..t, left-padded
    with zeros.
    """
    doc = json.loads(Path(edges_path).read_text())
    num_nodes = int(doc["num_nodes"])
    graphs = []
    for day in doc["days"]:
        edges = {(min(u, v), max(u, v)) for u, v in day if u != v}
        graphs.append(Graph(num_nodes, edges))

    with open(cases_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and not _is_numeric_row(rows[0]):
        rows = rows[1:]
    cases = np.asarray([[float(x) for x in row] for row in rows])
    if cases.shape[0] < len(graphs) or cases.shape[1] != num_nodes:
        raise ValueError(
            f"case table {cases.shape} does not cover {len(graphs)} days x "
            f"{num_nodes} regions"
        )

    padded = np.vstack([np.zeros((window - 1, num_nodes)), cases])
    features = [
        padded[t : t + window].T.copy() for t in range(len(graphs))
    ]  # region-major: N x window
    return GraphSeries(num_nodes, graphs, features)


def _is_numeric_row(row) -> bool:
    try:
        [float(x) for x in row]
        return True
    except ValueError:
        return False
