import json

import numpy as np
import pytest

from dyncc.cc import CcSeries, CombinatorialComplex, Graph, GraphSeries
from dyncc.series_io import (
    load_cc_series,
    load_graph_series,
    save_cc_series,
    save_graph_series,
)
from conftest import random_graph, rng_for


class TestGraphSeriesIo:
    def test_round_trip(self, tmp_path):
        rng = rng_for(110)
        series = GraphSeries(6, [random_graph(rng, 6, 0.5) for _ in range(3)])
        path = tmp_path / "gs.json"
        save_graph_series(series, path)
        assert load_graph_series(path) == series

    def test_round_trip_with_features(self, tmp_path):
        rng = rng_for(111)
        graphs = [random_graph(rng, 4) for _ in range(2)]
        feats = [rng.random((4, 3)) for _ in range(2)]
        series = GraphSeries(4, graphs, feats)
        path = tmp_path / "gs.json"
        save_graph_series(series, path)
        loaded = load_graph_series(path)
        assert loaded == series
        for t in range(2):
            assert np.allclose(loaded.features[t], feats[t])

    def test_wrong_format_tag_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "nope", "num_nodes": 2, "timesteps": []}))
        with pytest.raises(ValueError, match="expected format"):
            load_graph_series(path)


class TestCcSeriesIo:
    def test_round_trip(self, tmp_path):
        series = CcSeries(
            4,
            [
                CombinatorialComplex(4, [(0, 1), (1, 2)], [(0, 1, 2)]),
                CombinatorialComplex(4, [(2, 3)], []),
            ],
        )
        path = tmp_path / "cs.json"
        save_cc_series(series, path)
        assert load_cc_series(path) == series

    def test_features_survive(self, tmp_path):
        feats = rng_for(112).random((3, 2))
        series = CcSeries(3, [CombinatorialComplex(3, [(0, 1)], [], feats)])
        path = tmp_path / "cs.json"
        save_cc_series(series, path)
        loaded = load_cc_series(path)
        assert np.allclose(loaded.ccs[0].node_features, feats)

    def test_rank_three_cells_rejected(self, tmp_path):
        # a timestep carrying cells_3 cannot be represented by this model
        doc = {
            "format": "ccseries-v1",
            "num_nodes": 10,
            "timesteps": [
                {
                    "cells_1": [[0, 1]],
                    "cells_2": [[1, 2, 6]],
                    "cells_3": [[0, 4, 5, 6, 7, 8, 9]],
                }
            ],
        }
        path = tmp_path / "r3.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="cells_3"):
            load_cc_series(path)

    def test_deterministic_bytes(self, tmp_path):
        series = CcSeries(3, [CombinatorialComplex(3, [(0, 1)], [(0, 1, 2)])])
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_cc_series(series, a)
        save_cc_series(series, b)
        assert a.read_bytes() == b.read_bytes()
