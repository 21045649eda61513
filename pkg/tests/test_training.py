import numpy as np
import pytest

from dyncc.generators import gen_dataset
from dyncc.lifting import lift_series
from dyncc.training import (
    TrainConfig,
    init_model,
    load_model,
    save_model,
    signal_width,
    train,
    _rng,
)
from dyncc.nn import named_tensors


def tiny_dataset():
    raw = gen_dataset("tiny-ba", 3, (2, 1, 0), seed=60)
    return {
        "train": [lift_series(s) for s in raw["train"]],
        "val": [lift_series(s) for s in raw["val"]],
    }


class TestTrainConfig:
    def test_decay_factor_bounds(self):
        with pytest.raises(ValueError):
            TrainConfig(decay_factor=1.0)

    def test_patience_ordering(self):
        with pytest.raises(ValueError):
            TrainConfig(patience_decay=20, patience_stop=20)

    def test_zero_patience_stop_allowed(self):
        TrainConfig(patience_stop=0)  # degenerate stop-after-first-epoch


class TestTrain:
    def test_zero_patience_runs_exactly_one_epoch(self):
        config = TrainConfig(
            loss_mode="bce", patience_stop=0, max_epochs=50, hidden=8, seed=1
        )
        result = train(config, tiny_dataset())
        assert len(result.curve) == 1

    def test_curves_deterministic_given_seed(self):
        config = TrainConfig(
            loss_mode="bce", patience_decay=2, patience_stop=3, max_epochs=3,
            hidden=8, seed=2,
        )
        a = train(config, tiny_dataset())
        b = train(config, tiny_dataset())
        assert a.curve == b.curve

    def test_lr_non_increasing_exact_decades(self):
        config = TrainConfig(
            loss_mode="sinkhorn-cosine", traversal_mode="stochastic",
            patience_decay=1, patience_stop=6, max_epochs=8, hidden=8, seed=3,
        )
        result = train(config, tiny_dataset())
        lrs = [row["lr"] for row in result.curve]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        for lr in lrs:
            ratio = lr / config.lr
            decades = round(np.log10(ratio))
            assert ratio == pytest.approx(10.0**decades, rel=1e-9)

    def test_best_val_bounded_by_curve(self):
        config = TrainConfig(
            loss_mode="bce", patience_decay=2, patience_stop=4, max_epochs=5,
            hidden=8, seed=4,
        )
        result = train(config, tiny_dataset())
        assert result.best_val <= min(row["val_loss"] for row in result.curve)

    def test_needs_both_splits(self):
        ds = tiny_dataset()
        with pytest.raises(ValueError):
            train(TrainConfig(hidden=8), {"train": ds["train"], "val": []})


class TestSignalWidth:
    def test_identity_width_is_node_count(self):
        ds = tiny_dataset()
        assert signal_width(ds["train"]) == 6

    def test_inconsistent_widths_rejected(self):
        from dyncc.cc import CcSeries, CombinatorialComplex

        a = CcSeries(3, [CombinatorialComplex(3, [(0, 1)])])
        b = CcSeries(4, [CombinatorialComplex(4, [(0, 1)])])
        with pytest.raises(ValueError):
            signal_width([a, b])


class TestCheckpointRoundTrip:
    def test_save_load_preserves_parameters(self, tmp_path):
        model = init_model(_rng([5, 0]), d0=6, hidden=8)
        save_model(tmp_path / "ckpt", model, d0=6, seed=5)
        loaded, manifest = load_model(tmp_path / "ckpt")
        assert manifest["hyperparameters"]["hidden"] == 8
        for (name_a, ta), (name_b, tb) in zip(
            named_tensors(model), named_tensors(loaded)
        ):
            assert name_a == name_b
            assert np.allclose(ta.data, tb.data, atol=1e-6)  # float32 blob
