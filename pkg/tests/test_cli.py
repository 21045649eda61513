import json
from pathlib import Path

import numpy as np
import pytest

from dyncc.cli import main
from dyncc.series_io import load_cc_series, load_graph_series


def run(*argv) -> int:
    return main(list(argv))


@pytest.fixture
def tiny_data(tmp_path):
    """tiny-ba graph dataset + lifted CC dataset directories."""
    graphs = tmp_path / "graphs"
    ccs = tmp_path / "ccs"
    assert run(
        "gen", "--model", "tiny-ba", "--seed", "1", "--count", "5",
        "--split", "3,1,1", "--out", str(graphs),
    ) == 0
    assert run("lift", "--in", str(graphs), "--out", str(ccs)) == 0
    return graphs, ccs


class TestGenAndLift:
    def test_gen_writes_splits_and_manifest(self, tiny_data):
        graphs, _ = tiny_data
        names = sorted(p.name for p in graphs.glob("*.json"))
        assert names == [
            "run-manifest.json", "test_0.json", "train_0.json",
            "train_1.json", "train_2.json", "val_0.json",
        ]
        series = load_graph_series(graphs / "train_0.json")
        assert series.num_nodes == 6 and len(series) == 5

    def test_lift_preserves_filenames(self, tiny_data):
        graphs, ccs = tiny_data
        graph_names = {p.name for p in graphs.glob("*_*.json")}
        cc_names = {p.name for p in ccs.glob("*_*.json")}
        assert graph_names == cc_names
        series = load_cc_series(ccs / "train_0.json")
        assert len(series) == 5


class TestBaselineAndEval:
    def test_eval_cc_identical_series_hc_zero(self, tiny_data, tmp_path):
        _, ccs = tiny_data
        report_path = tmp_path / "report.json"
        assert run(
            "eval-cc", "--pred", str(ccs / "test_0.json"),
            "--target", str(ccs / "test_0.json"),
            "--losses", "hc,hbce", "--out", str(report_path),
        ) == 0
        report = json.loads(report_path.read_text())
        assert report["mean"]["rank1"]["hc"] == pytest.approx(0.0, abs=1e-9)
        assert report["flagged"] == []

    def test_baseline_then_eval(self, tmp_path):
        graphs = tmp_path / "g"
        ccs = tmp_path / "c"
        assert run(
            "gen", "--model", "ba", "--n", "16", "--m", "2", "--seed", "3",
            "--count", "1", "--split", "0,0,1", "--out", str(graphs),
        ) == 0
        assert run("lift", "--in", str(graphs), "--out", str(ccs)) == 0
        pred = tmp_path / "pred.json"
        assert run(
            "baseline", "--target", str(ccs / "test_0.json"), "--out", str(pred),
            "--seed", "4", "--r2-max", "8",
        ) == 0
        report = tmp_path / "rep.json"
        assert run(
            "eval-cc", "--pred", str(pred), "--target", str(ccs / "test_0.json"),
            "--losses", "hc,sc", "--out", str(report),
        ) == 0
        doc = json.loads(report.read_text())
        assert doc["mean"]["rank1"]["hc"] > 0.0

    def test_eval_graph_on_cc_series(self, tiny_data, tmp_path):
        _, ccs = tiny_data
        out = tmp_path / "metrics.csv"
        assert run(
            "eval-graph", "--pred", str(ccs / "val_0.json"),
            "--target", str(ccs / "test_0.json"), "--out", str(out),
        ) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "metric,value"
        assert len(lines) == 12


class TestTrainAndSample:
    def test_train_sample_pipeline(self, tiny_data, tmp_path):
        _, ccs = tiny_data
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "loss_mode": "bce", "traversal_mode": "deterministic",
            "max_epochs": 2, "patience_decay": 5, "patience_stop": 6,
            "hidden": 8, "seed": 11,
        }))
        ckpt = tmp_path / "ckpt"
        assert run("train", "--config", str(cfg), "--data", str(ccs), "--out", str(ckpt)) == 0
        assert (ckpt / "manifest.json").exists()
        assert (ckpt / "params.bin").exists()
        curves = (ckpt / "curves.csv").read_text().strip().splitlines()
        assert curves[0] == "epoch,train_loss,val_loss,lr"
        assert len(curves) == 3

        pred = tmp_path / "pred.json"
        assert run(
            "sample", "--model", str(ckpt), "--in", str(ccs / "test_0.json"),
            "--out", str(pred), "--seed", "5",
        ) == 0
        series = load_cc_series(pred)
        assert len(series) == 5
        # rank-1 predictions are node pairs
        for cc in series.ccs[1:]:
            for cell in cc.cells1:
                assert len(cell) == 2


class TestIngestCovid:
    def test_ingest_builds_features(self, tmp_path):
        edges = {
            "num_nodes": 3,
            "days": [[[0, 1], [1, 0], [2, 2]], [[1, 2]], [[0, 2], [0, 1]]],
        }
        (tmp_path / "edges.json").write_text(json.dumps(edges))
        rows = ["r0,r1,r2"] + [f"{d},{d+1},{d+2}" for d in range(3)]
        (tmp_path / "cases.csv").write_text("\n".join(rows) + "\n")
        out = tmp_path / "covid.json"
        assert run(
            "ingest-covid", "--edges", str(tmp_path / "edges.json"),
            "--cases", str(tmp_path / "cases.csv"), "--window", "4",
            "--out", str(out),
        ) == 0
        series = load_graph_series(out)
        assert len(series) == 3
        # self-loop removed, directed duplicates merged
        assert series.graphs[0].edge_list() == [(0, 1)]
        # day-2 feature of region 0: zero-padded window (0, 0, 1, 2)
        assert series.features[1][0].tolist() == [0.0, 0.0, 0.0, 1.0]
        assert series.features[2][0].tolist() == [0.0, 0.0, 1.0, 2.0]


class TestErrors:
    def test_missing_file_is_clean_error(self, tmp_path):
        assert run(
            "eval-cc", "--pred", str(tmp_path / "nope.json"),
            "--target", str(tmp_path / "nope.json"), "--out", str(tmp_path / "r.json"),
        ) == 1

    def test_unknown_loss_rejected(self, tiny_data, tmp_path):
        _, ccs = tiny_data
        assert run(
            "eval-cc", "--pred", str(ccs / "test_0.json"),
            "--target", str(ccs / "test_0.json"),
            "--losses", "bogus", "--out", str(tmp_path / "r.json"),
        ) == 1
