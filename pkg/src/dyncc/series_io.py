"""JSON serialization for graph and CC time series.

Two schemas, identified by a top-level "format" tag:

* ``graphseries-v1``: ``{"format": ..., "num_nodes": N, "timesteps":
  [{"edges": [[u, v], ...], "features": [[...], ...]?}, ...]}``
* ``ccseries-v1``: identical except each timestep carries ``"cells_1"`` and
  ``"cells_2"`` instead of ``"edges"``.

All node indices are 0-based in files. Loaders are strict: unknown timestep
keys (for example a ``cells_3`` list, which the rank-<=2 data model cannot
represent) are rejected with an error naming the offending key.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cc import CcSeries, CombinatorialComplex, Graph, GraphSeries

__all__ = [
    "GRAPH_SERIES_FORMAT",
    "CC_SERIES_FORMAT",
    "save_graph_series",
    "load_graph_series",
    "save_cc_series",
    "load_cc_series",
    "dump_json",
]

GRAPH_SERIES_FORMAT = "graphseries-v1"
CC_SERIES_FORMAT = "ccseries-v1"

_GRAPH_KEYS = {"edges", "features"}
_CC_KEYS = {"cells_1", "cells_2", "features"}


def dump_json(payload, path) -> None:
    """Write JSON deterministically (sorted keys, fixed separators)."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n")


def _check_format(doc, expected: str, path) -> None:
    got = doc.get("format")
    if got != expected:
        raise ValueError(f"{path}: expected format {expected!r}, found {got!r}")


def _check_keys(step: dict, allowed: set[str], path, index: int) -> None:
    unknown = set(step) - allowed
    if unknown:
        raise ValueError(
            f"{path}: timestep {index} has unsupported keys {sorted(unknown)}; "
            f"only ranks 0..2 are representable"
        )


def _features_payload(features: np.ndarray | None):
    if features is None:
        return None
    return np.asarray(features).tolist()


def save_graph_series(series: GraphSeries, path) -> None:
    timesteps = []
    for t, g in enumerate(series.graphs):
        step = {"edges": [list(e) for e in g.edge_list()]}
        if series.features is not None:
            step["features"] = _features_payload(series.features[t])
        timesteps.append(step)
    dump_json(
        {
            "format": GRAPH_SERIES_FORMAT,
            "num_nodes": series.num_nodes,
            "timesteps": timesteps,
        },
        path,
    )


def load_graph_series(path) -> GraphSeries:
    doc = json.loads(Path(path).read_text())
    _check_format(doc, GRAPH_SERIES_FORMAT, path)
    num_nodes = int(doc["num_nodes"])
    graphs, features, any_features = [], [], False
    for i, step in enumerate(doc["timesteps"]):
        _check_keys(step, _GRAPH_KEYS, path, i)
        graphs.append(Graph(num_nodes, [tuple(e) for e in step["edges"]]))
        feat = step.get("features")
        any_features = any_features or feat is not None
        features.append(None if feat is None else np.asarray(feat, dtype=np.float64))
    if any_features and any(f is None for f in features):
        raise ValueError(f"{path}: features must be present on all timesteps or none")
    return GraphSeries(num_nodes, graphs, features if any_features else None)


def save_cc_series(series: CcSeries, path) -> None:
    timesteps = []
    for cc in series.ccs:
        step = {
            "cells_1": [list(c) for c in cc.cells1],
            "cells_2": [list(c) for c in cc.cells2],
        }
        if cc.node_features is not None:
            step["features"] = _features_payload(cc.node_features)
        timesteps.append(step)
    dump_json(
        {
            "format": CC_SERIES_FORMAT,
            "num_nodes": series.num_nodes,
            "timesteps": timesteps,
        },
        path,
    )


def load_cc_series(path) -> CcSeries:
    doc = json.loads(Path(path).read_text())
    _check_format(doc, CC_SERIES_FORMAT, path)
    num_nodes = int(doc["num_nodes"])
    ccs = []
    for i, step in enumerate(doc["timesteps"]):
        _check_keys(step, _CC_KEYS, path, i)
        feat = step.get("features")
        ccs.append(
            CombinatorialComplex(
                num_nodes,
                [tuple(c) for c in step["cells_1"]],
                [tuple(c) for c in step["cells_2"]],
                None if feat is None else np.asarray(feat, dtype=np.float64),
            )
        )
    return CcSeries(num_nodes, ccs)
