"""Neural building blocks on top of the tensor engine.

Contains the single-affine MLP used throughout the decoder, a gated
recurrent (LSTM) cell, a binary tree-combining cell, a one-layer
self-attention summarizer with sinusoidal positions, the Adam optimizer,
Glorot initialization, and the checkpoint format (JSON manifest plus a flat
little-endian float32 blob in manifest order).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "HIDDEN_SIZE",
    "glorot",
    "MlpParams",
    "RecurrentCellParams",
    "TreeCellParams",
    "AttentionEncoderParams",
    "affine",
    "apply_mlp",
    "recurrent_cell",
    "tree_cell",
    "attention_summarize",
    "AdamState",
    "adam_step",
    "named_tensors",
    "save_checkpoint",
    "load_checkpoint",
]

HIDDEN_SIZE = 256

CHECKPOINT_FORMAT = "ckpt-v1"


def glorot(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    bound = math.sqrt(6.0 / (rows + cols))
    return ad.parameter(rng.uniform(-bound, bound, size=(rows, cols)))


@dataclass
class MlpParams:
    """Single affine map with an output activation tag."""

    w: Tensor
    b: Tensor
    activation: str = "none"  # none | tanh | sigmoid

    @classmethod
    def create(cls, rng, d_in: int, d_out: int, activation: str = "none"):
        return cls(glorot(rng, d_in, d_out), ad.parameter(np.zeros((1, d_out))), activation)


def affine(params: MlpParams, x: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, params.w), params.b)


def apply_mlp(params: MlpParams, x: Tensor) -> Tensor:
    z = affine(params, x)
    if params.activation == "tanh":
        return ad.tanh(z)
    if params.activation == "sigmoid":
        return ad.sigmoid(z)
    return z


@dataclass
class RecurrentCellParams:
    """LSTM cell: gates from [input || hidden], order (i, f, o, g)."""

    w: Tensor
    b: Tensor
    hidden: int

    @classmethod
    def create(cls, rng, d_in: int, hidden: int):
        return cls(
            glorot(rng, d_in + hidden, 4 * hidden),
            ad.parameter(np.zeros((1, 4 * hidden))),
            hidden,
        )


def recurrent_cell(x: Tensor, h: Tensor, c: Tensor, params: RecurrentCellParams):
    n = params.hidden
    z = ad.add(ad.matmul(ad.concat([x, h], axis=1), params.w), params.b)
    i = ad.sigmoid(ad.slice_cols(z, 0, n))
    f = ad.sigmoid(ad.slice_cols(z, n, 2 * n))
    o = ad.sigmoid(ad.slice_cols(z, 2 * n, 3 * n))
    g = ad.tanh(ad.slice_cols(z, 3 * n, 4 * n))
    c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_next = ad.mul(o, ad.tanh(c_next))
    return h_next, c_next


@dataclass
class TreeCellParams:
    """Binary tree cell: gates (i, f_left, f_right, o, g) from both children."""

    w: Tensor
    b: Tensor
    hidden: int

    @classmethod
    def create(cls, rng, hidden: int):
        return cls(
            glorot(rng, 2 * hidden, 5 * hidden),
            ad.parameter(np.zeros((1, 5 * hidden))),
            hidden,
        )


def tree_cell(h_l, c_l, h_r, c_r, params: TreeCellParams):
    """Combine two child states; absent children enter as zero vectors."""
    n = params.hidden
    zero = ad.constant(np.zeros((1, n)))
    h_l = zero if h_l is None else h_l
    c_l = zero if c_l is None else c_l
    h_r = zero if h_r is None else h_r
    c_r = zero if c_r is None else c_r
    z = ad.add(ad.matmul(ad.concat([h_l, h_r], axis=1), params.w), params.b)
    i = ad.sigmoid(ad.slice_cols(z, 0, n))
    f_l = ad.sigmoid(ad.slice_cols(z, n, 2 * n))
    f_r = ad.sigmoid(ad.slice_cols(z, 2 * n, 3 * n))
    o = ad.sigmoid(ad.slice_cols(z, 3 * n, 4 * n))
    g = ad.tanh(ad.slice_cols(z, 4 * n, 5 * n))
    c_next = ad.add_n([ad.mul(f_l, c_l), ad.mul(f_r, c_r), ad.mul(i, g)])
    h_next = ad.mul(o, ad.tanh(c_next))
    return h_next, c_next


@dataclass
class AttentionEncoderParams:
    """Single-head self-attention used to summarize the row history."""

    wq: Tensor
    wk: Tensor
    wv: Tensor
    hidden: int

    @classmethod
    def create(cls, rng, hidden: int):
        return cls(
            glorot(rng, hidden, hidden),
            glorot(rng, hidden, hidden),
            glorot(rng, hidden, hidden),
            hidden,
        )


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None].astype(np.float64)
    idx = np.arange(dim)[None, :].astype(np.float64)
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    enc = np.zeros((length, dim))
    enc[:, 0::2] = np.sin(angle[:, 0::2])
    enc[:, 1::2] = np.cos(angle[:, 1::2])
    return enc


def attention_summarize(history, params: AttentionEncoderParams) -> Tensor:
    """Self-attention with sinusoidal positions over the history of row
    summaries; returns the last position's output vector (1 x hidden)."""
    if not history:
        raise ValueError("history must contain at least one vector")
    x = ad.add(
        ad.concat(list(history), axis=0),
        ad.constant(sinusoidal_positions(len(history), params.hidden)),
    )
    q = ad.matmul(x, params.wq)
    k = ad.matmul(x, params.wk)
    v = ad.matmul(x, params.wv)
    scores = ad.mul_scalar(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(params.hidden))
    att = ad.masked_row_softmax(scores, np.ones(scores.shape, dtype=bool))
    out = ad.matmul(att, v)
    return ad.slice_rows(out, len(history) - 1, len(history))


@dataclass
class AdamState:
    """First/second moments per parameter plus the step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    moments: dict = dataclasses.field(default_factory=dict)

    def for_param(self, p: Tensor):
        key = id(p)
        if key not in self.moments:
            self.moments[key] = (np.zeros(p.shape), np.zeros(p.shape))
        return self.moments[key]


def adam_step(params, state: AdamState) -> None:
    """One Adam update over `params`; parameters without a gradient stay put.

    Standard update with the bias corrections folded into scalars:
    p -= lr/(1-b1^t) * m / (sqrt(v/(1-b2^t)) + eps).
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2_sqrt = math.sqrt(1.0 - state.beta2**t)
    for p in params:
        if p.grad is None:
            continue
        m, v = state.for_param(p)
        m *= state.beta1
        m += (1.0 - state.beta1) * p.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(p.grad)
        denom = np.sqrt(v)
        denom /= bc2_sqrt
        denom += state.eps
        np.divide(m, denom, out=denom)
        denom *= state.lr / bc1
        p.data -= denom


def named_tensors(obj, prefix: str = "") -> list[tuple[str, Tensor]]:
    """Walk dataclass fields and collect (dotted-name, Tensor) pairs in a
    deterministic order (field order, recursing into nested dataclasses,
    tuples and lists)."""
    out: list[tuple[str, Tensor]] = []
    if isinstance(obj, Tensor):
        out.append((prefix or "param", obj))
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            name = f"{prefix}.{f.name}" if prefix else f.name
            out.extend(named_tensors(val, name))
    elif isinstance(obj, (tuple, list)):
        for i, val in enumerate(obj):
            out.extend(named_tensors(val, f"{prefix}[{i}]"))
    return out


def save_checkpoint(directory, named, hyperparameters: dict, seed: int) -> None:
    """Write manifest.json plus params.bin (flat little-endian float32 in
    manifest order)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "hyperparameters": hyperparameters,
        "seed": seed,
        "tensors": [
            {"name": name, "rows": t.shape[0], "cols": t.shape[1]}
            for name, t in named
        ],
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n"
    )
    blob = np.concatenate(
        [t.data.reshape(-1) for _, t in named] or [np.zeros(0)]
    ).astype("<f4")
    (directory / "params.bin").write_bytes(blob.tobytes())


def load_checkpoint(directory):
    """Read a checkpoint; returns ({name: float64 array}, manifest dict)."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{directory}: not a {CHECKPOINT_FORMAT} checkpoint")
    blob = np.frombuffer((directory / "params.bin").read_bytes(), dtype="<f4")
    tensors = {}
    offset = 0
    for spec in manifest["tensors"]:
        size = spec["rows"] * spec["cols"]
        tensors[spec["name"]] = (
            blob[offset : offset + size].astype(np.float64).reshape(spec["rows"], spec["cols"])
        )
        offset += size
    if offset != blob.size:
        raise ValueError(f"{directory}: blob size {blob.size} != manifest total {offset}")
    return tensors, manifest
