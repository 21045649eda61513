"""Training loop, early stopping, learning-rate decay, and the ablation grid.

An epoch is one pass over every consecutive (CC_t, CC_{t+1}) pair of every
training series in fixed order; each pair is one gradient step (no
batching, no accumulation across pairs). The learning rate decays by the
configured factor whenever the validation loss has not improved for
`patience_decay` consecutive epochs, and training stops after
`patience_stop` epochs without improvement (or at `max_epochs`). The
returned model is the best-validation snapshot.

The ablation grid trains the four (loss, traversal) combinations on a
1-cell-only dataset and reports which configurations cut their validation
loss below half of the first epoch's value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import backward
from .cc import CcSeries, co_incidence
from .decoder import (
    DecoderHyperparams,
    DecoderParams,
    init_decoder_params,
    teacher_forced_loss,
)
from .encoder import EncoderParams, encode_cc, init_encoder_params, neighborhood_matrices
from .nn import (
    HIDDEN_SIZE,
    AdamState,
    adam_step,
    load_checkpoint,
    named_tensors,
    save_checkpoint,
)

__all__ = [
    "TrainConfig",
    "ModelParams",
    "TrainResult",
    "ABLATION_MODELS",
    "init_model",
    "signal_width",
    "train",
    "run_ablation",
    "save_model",
    "load_model",
]

ABLATION_MODELS = {
    "model1": ("bce", "deterministic"),
    "model2": ("bce", "stochastic"),
    "model3": ("sinkhorn-cosine", "deterministic"),
    "model4": ("sinkhorn-cosine", "stochastic"),
}

_LOSS_MODES = {"bce": "bce", "sinkhorn-cosine": "sc", "sc": "sc"}


@dataclass(frozen=True)
class TrainConfig:
    loss_mode: str = "sinkhorn-cosine"
    traversal_mode: str = "deterministic"
    lr: float = 1e-3
    decay_factor: float = 0.1
    patience_decay: int = 10
    patience_stop: int = 20
    max_epochs: int = 200
    seed: int = 0
    hidden: int = HIDDEN_SIZE
    sinkhorn_eps: float = 0.1
    sinkhorn_iters: int = 50
    temperature: float = 0.5
    n_max_rank1: int = 2
    n_max_rank2: int = 15

    def __post_init__(self) -> None:
        if not 0.0 < self.decay_factor < 1.0:
            raise ValueError("decay_factor must lie in (0, 1)")
        if self.patience_decay < 1:
            raise ValueError("patience_decay must be >= 1")
        # patience_stop == 0 is the degenerate stop-after-first-epoch case.
        if self.patience_stop > 0 and self.patience_decay >= self.patience_stop:
            raise ValueError("patience_decay must be smaller than patience_stop")
        if self.loss_mode not in _LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")
        if self.traversal_mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown traversal mode {self.traversal_mode!r}")


@dataclass
class ModelParams:
    encoder: EncoderParams
    dec_rank1: DecoderParams
    dec_rank2: DecoderParams


@dataclass
class TrainResult:
    model: ModelParams
    curve: list[dict] = field(default_factory=list)
    best_val: float = math.inf
    best_epoch: int = 0


def _rng(entropy) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def signal_width(series_list) -> int:
    """Width of the node signal: feature width if features are present on
    every series, otherwise the (shared) node count for identity signals."""
    widths = set()
    for series in series_list:
        first = series.ccs[0]
        if first.node_features is not None:
            widths.add(first.node_features.shape[1])
        else:
            widths.add(-series.num_nodes)  # negative marks identity signals
    if len(widths) != 1:
        raise ValueError(f"inconsistent node-signal widths across series: {widths}")
    w = widths.pop()
    return -w if w < 0 else w


def init_model(rng: np.random.Generator, d0: int, hidden: int = HIDDEN_SIZE) -> ModelParams:
    return ModelParams(
        encoder=init_encoder_params(rng, d0, hidden),
        dec_rank1=init_decoder_params(rng, hidden),
        dec_rank2=init_decoder_params(rng, hidden),
    )


def _prepare(series: CcSeries) -> list[dict]:
    return [
        {
            "cc": cc,
            "mats": neighborhood_matrices(cc),
            "rows1": co_incidence(cc, 1),
            "rows2": co_incidence(cc, 2),
        }
        for cc in series.ccs
    ]


def _pair_loss(model, prepared, t, config, rng):
    step_t, step_next = prepared[t], prepared[t + 1]
    h1, h2 = encode_cc(step_t["cc"], model.encoder, step_t["mats"])
    mode = _LOSS_MODES[config.loss_mode]
    hp1 = DecoderHyperparams(
        n_max=config.n_max_rank1,
        traversal_mode=config.traversal_mode,
        temperature=config.temperature,
    )
    hp2 = DecoderHyperparams(
        n_max=config.n_max_rank2,
        traversal_mode=config.traversal_mode,
        temperature=config.temperature,
    )
    loss1 = teacher_forced_loss(
        h1, step_next["rows1"], mode, hp1, model.dec_rank1, rng,
        eps=config.sinkhorn_eps, sinkhorn_iters=config.sinkhorn_iters,
    )
    loss2 = teacher_forced_loss(
        h2, step_next["rows2"], mode, hp2, model.dec_rank2, rng,
        eps=config.sinkhorn_eps, sinkhorn_iters=config.sinkhorn_iters,
    )
    return ad.add(loss1, loss2)


def _epoch_val_loss(model, prepared_val, config, rng) -> float:
    total, count = 0.0, 0
    with ad.no_grad():
        for prepared in prepared_val:
            for t in range(len(prepared) - 1):
                total += _pair_loss(model, prepared, t, config, rng).item()
                count += 1
    return total / max(count, 1)


def train(
    config: TrainConfig,
    dataset: dict,
    stop_at_fraction_of_first: float | None = None,
    log_fn=None,
) -> TrainResult:
    """Train on dataset["train"], early-stop on dataset["val"].

    Raises RuntimeError naming (epoch, series, timestep) if a loss goes
    non-finite. `stop_at_fraction_of_first` ends training once the
    validation loss drops below that fraction of the first epoch's value
    (used by the ablation harness).
    """
    train_series = [s for s in dataset["train"]]
    val_series = [s for s in dataset["val"]]
    if not train_series or not val_series:
        raise ValueError("dataset needs non-empty train and val splits")
    d0 = signal_width(train_series + val_series)
    model = init_model(_rng([config.seed, 0]), d0, config.hidden)
    params = [t for _, t in named_tensors(model)]
    adam = AdamState(lr=config.lr)
    prepared_train = [_prepare(s) for s in train_series]
    prepared_val = [_prepare(s) for s in val_series]

    result = TrainResult(model=model)
    best_snapshot = None
    lr = config.lr
    epochs_since_improvement = 0
    first_val = None

    for epoch in range(1, config.max_epochs + 1):
        adam.lr = lr
        rng_train = _rng([config.seed, 1, epoch])
        total, count = 0.0, 0
        for si, prepared in enumerate(prepared_train):
            for t in range(len(prepared) - 1):
                for p in params:
                    p.zero_grad()
                try:
                    loss = _pair_loss(model, prepared, t, config, rng_train)
                    value = loss.item()
                except FloatingPointError as exc:
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch}, series {si}, timestep {t}"
                    ) from exc
                if not math.isfinite(value):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch}, series {si}, timestep {t}"
                    )
                backward(loss)
                adam_step(params, adam)
                total += value
                count += 1
        train_loss = total / max(count, 1)
        val_loss = _epoch_val_loss(model, prepared_val, config, _rng([config.seed, 2, epoch]))
        result.curve.append(
            {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr}
        )
        if log_fn is not None:
            log_fn(result.curve[-1])
        if first_val is None:
            first_val = val_loss

        if val_loss < result.best_val:
            result.best_val = val_loss
            result.best_epoch = epoch
            best_snapshot = {name: t.data.copy() for name, t in named_tensors(model)}
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement % config.patience_decay == 0:
                lr *= config.decay_factor

        if stop_at_fraction_of_first is not None and (
            val_loss < stop_at_fraction_of_first * first_val
        ):
            break
        if epochs_since_improvement >= config.patience_stop:
            break

    if best_snapshot is not None:
        for name, t in named_tensors(model):
            t.data[...] = best_snapshot[name]
    return result


def run_ablation(
    dataset: dict,
    seeds,
    model1_max_epochs: int = 200,
    others_max_epochs: int = 20,
    others_seed_count: int = 1,
    hidden: int = HIDDEN_SIZE,
    lr: float = 1e-3,
    log_fn=None,
) -> dict:
    """Train the four (loss, traversal) configurations on a tiny dataset.

    The BCE/deterministic configuration runs every seed with a
    half-of-epoch-1 target; the other three produce loss curves on a
    reduced budget. Early stopping by patience is disabled so the curves
    cover the full budget.
    """
    seeds = list(seeds)
    report: dict = {"models": {}}
    for model_id, (loss_mode, traversal) in ABLATION_MODELS.items():
        is_first = model_id == "model1"
        max_epochs = model1_max_epochs if is_first else others_max_epochs
        model_seeds = seeds if is_first else seeds[: max(others_seed_count, 1)]
        runs = []
        for seed in model_seeds:
            config = TrainConfig(
                loss_mode=loss_mode,
                traversal_mode=traversal,
                lr=lr,
                patience_decay=10,
                patience_stop=max_epochs + 1,
                max_epochs=max_epochs,
                seed=seed,
                hidden=hidden,
            )
            result = train(
                config,
                dataset,
                stop_at_fraction_of_first=0.5 if is_first else None,
                log_fn=log_fn,
            )
            epoch1 = result.curve[0]["val_loss"]
            runs.append(
                {
                    "seed": seed,
                    "epoch1_val": epoch1,
                    "best_val": result.best_val,
                    "epochs_run": len(result.curve),
                    "halved": result.best_val < 0.5 * epoch1,
                    "curve": result.curve,
                }
            )
        report["models"][model_id] = {
            "loss": loss_mode,
            "traversal": traversal,
            "runs": runs,
            "halved_runs": sum(r["halved"] for r in runs),
        }
    report["improved_models"] = [
        mid
        for mid, entry in report["models"].items()
        if entry["halved_runs"] * 2 > len(entry["runs"])
    ]
    return report


def save_model(directory, model: ModelParams, d0: int, seed: int, extra: dict | None = None):
    """Persist a model as the versioned manifest + float32 blob format."""
    hyper = {"d0": d0, "hidden": model.encoder.hidden}
    if extra:
        hyper.update(extra)
    save_checkpoint(directory, named_tensors(model), hyper, seed)


def load_model(directory) -> tuple[ModelParams, dict]:
    """Rebuild a model from a checkpoint directory."""
    tensors, manifest = load_checkpoint(directory)
    hyper = manifest["hyperparameters"]
    model = init_model(_rng([manifest.get("seed", 0), 0]), hyper["d0"], hyper["hidden"])
    for name, t in named_tensors(model):
        if name not in tensors:
            raise ValueError(f"checkpoint missing tensor {name!r}")
        if tensors[name].shape != t.shape:
            raise ValueError(
                f"checkpoint tensor {name!r} has shape {tensors[name].shape}, "
                f"expected {t.shape}"
            )
        t.data[...] = tensors[name]
    return model, manifest
