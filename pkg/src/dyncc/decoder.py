"""Tree-structured autoregressive sampling of co-incidence matrices.

A row over |S| nodes is sampled by walking a binary interval tree: each
internal node decides (left gate, then right gate) whether a descendant
leaf will hold a 1, and each reached leaf flips its bit by a Bernoulli
draw. Hidden state descends through a recurrent cell and child states are
combined back with a tree cell; the combined root state summarizes the row
and feeds a self-attention summary of all previous rows, which conditions
the next row's root. Rows that come back with a forbidden nonzero count
(1..min_nonzero) are resampled up to a cap and then emitted as zero rows;
zero rows are discarded from the returned matrix.

Two traversal modes: "deterministic" compares the raw gate sigmoid to the
threshold; "stochastic" pushes the gate logit through a
temperature-relaxed Bernoulli before comparing. Teacher forcing supports a
binary cross-entropy loss along the target row's forced walk and a
Sinkhorn-cosine loss over fully soft rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cc import CoIncidenceMatrix, CombinatorialComplex, from_co_incidence
from .encoder import CcMatrices, EncoderParams, encode_cc
from .matching import pad_rows, sinkhorn_plan
from .nn import (
    HIDDEN_SIZE,
    AttentionEncoderParams,
    MlpParams,
    RecurrentCellParams,
    TreeCellParams,
    affine,
    apply_mlp,
    attention_summarize,
    recurrent_cell,
    tree_cell,
)

__all__ = [
    "DecoderHyperparams",
    "DecoderParams",
    "RANK1_HYPERPARAMS",
    "RANK2_HYPERPARAMS",
    "init_decoder_params",
    "left_child",
    "right_child",
    "traverse_tree",
    "sample_row",
    "sample_incidence_matrix",
    "predict_next_cc",
    "teacher_forced_loss",
]


@dataclass(frozen=True)
class DecoderHyperparams:
    """Sampling knobs for one rank's incidence-matrix decoder."""

    n_max: int
    n_new_cell: int = 1
    p_min: float = 0.5
    min_nonzero: int = 1  # rows with 1..min_nonzero ones are resampled
    max_resample_attempts: int = 20
    traversal_mode: str = "deterministic"  # deterministic | stochastic
    temperature: float = 0.5

    def __post_init__(self) -> None:
        if self.n_max < 1 or self.n_new_cell < 1:
            raise ValueError("n_max and n_new_cell must be >= 1")
        if self.max_resample_attempts < 1:
            raise ValueError("max_resample_attempts must be >= 1")
        if not 0.0 < self.p_min < 1.0:
            raise ValueError("p_min must lie in (0, 1)")
        if self.traversal_mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown traversal mode {self.traversal_mode!r}")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")


RANK1_HYPERPARAMS = DecoderHyperparams(n_max=2)
RANK2_HYPERPARAMS = DecoderHyperparams(n_max=15)


@dataclass
class DecoderParams:
    mlp_cat: MlpParams  # 2*hidden -> hidden, tanh
    mlp_left: MlpParams  # hidden -> 1
    mlp_right: MlpParams
    mlp_leaf: MlpParams
    rec: RecurrentCellParams
    tree: TreeCellParams
    summarizer: AttentionEncoderParams
    hidden: int


def init_decoder_params(rng: np.random.Generator, hidden: int = HIDDEN_SIZE):
    return DecoderParams(
        mlp_cat=MlpParams.create(rng, 2 * hidden, hidden, "tanh"),
        mlp_left=MlpParams.create(rng, hidden, 1, "sigmoid"),
        mlp_right=MlpParams.create(rng, hidden, 1, "sigmoid"),
        mlp_leaf=MlpParams.create(rng, hidden, 1, "sigmoid"),
        rec=RecurrentCellParams.create(rng, hidden, hidden),
        tree=TreeCellParams.create(rng, hidden),
        summarizer=AttentionEncoderParams.create(rng, hidden),
        hidden=hidden,
    )


def left_child(node: tuple[int, int]) -> tuple[int, int]:
    lo, hi = node
    return lo, (lo + hi) // 2


def right_child(node: tuple[int, int]) -> tuple[int, int]:
    lo, hi = node
    return (lo + hi) // 2 + 1, hi


def _relaxed_bernoulli(logit: float, temperature: float, rng) -> float:
    u = rng.random()
    noise = math.log(u) - math.log1p(-u)
    return 1.0 / (1.0 + math.exp(-(logit + noise) / temperature))


def _gate_open(kind, node, mlp, h, hp, rng, override) -> tuple[bool, float]:
    logit = affine(mlp, h).item()
    prob = 1.0 / (1.0 + math.exp(-logit))
    if override is not None:
        return bool(override(kind, node, prob)), prob
    if hp.traversal_mode == "stochastic":
        value = _relaxed_bernoulli(logit, hp.temperature, rng)
    else:
        value = prob
    return value > hp.p_min, prob


def traverse_tree(
    h: Tensor,
    node: tuple[int, int],
    c: Tensor,
    row: np.ndarray,
    hp: DecoderHyperparams,
    params: DecoderParams,
    rng: np.random.Generator,
    override=None,
    trace: dict | None = None,
):
    """Sample bits for `row` over the 1-based interval `node`.

    Returns (row, combined hidden, combined cell). `override`, used by
    tests, replaces every random decision: it is called as
    override(kind, node, probability) with kind in {left, right, leaf} and
    must return the boolean decision.
    """
    if trace is not None:
        trace["visited"] = trace.get("visited", 0) + 1
    if int(row.sum()) >= hp.n_max:
        return row, h, c
    lo, hi = node
    if lo == hi:
        prob = apply_mlp(params.mlp_leaf, h).item()
        if override is not None:
            bit = bool(override("leaf", node, prob))
        else:
            bit = rng.random() < prob
        row[lo - 1] = 1 if bit else 0
        return row, h, c

    h_l = c_l = h_r = c_r = None
    open_left, _ = _gate_open("left", node, params.mlp_left, h, hp, rng, override)
    if open_left:
        h0, c0 = recurrent_cell(h, h, c, params.rec)
        row, h_l, c_l = traverse_tree(
            h0, left_child(node), c0, row, hp, params, rng, override, trace
        )
    open_right, _ = _gate_open("right", node, params.mlp_right, h, hp, rng, override)
    if open_right:
        h0, c0 = recurrent_cell(h, h, c, params.rec)
        row, h_r, c_r = traverse_tree(
            h0, right_child(node), c0, row, hp, params, rng, override, trace
        )
    h_comb, c_comb = tree_cell(h_l, c_l, h_r, c_r, params.tree)
    return row, h_comb, c_comb


def sample_row(
    h_root: Tensor,
    num_cols: int,
    hp: DecoderHyperparams,
    params: DecoderParams,
    rng: np.random.Generator,
    override=None,
    trace: dict | None = None,
):
    """One full-row sample from the root interval; returns (row, g_new)
    where g_new is the root's combined hidden state."""
    row = np.zeros(num_cols, dtype=np.int64)
    c0 = ad.constant(np.zeros((1, params.hidden)))
    row, h_fin, _c_fin = traverse_tree(
        h_root, (1, num_cols), c0, row, hp, params, rng, override, trace
    )
    return row, h_fin


def _row_valid(count: int, hp: DecoderHyperparams) -> bool:
    return count == 0 or count > hp.min_nonzero


def sample_incidence_matrix(
    h_enc,
    num_cols: int,
    hp: DecoderHyperparams,
    params: DecoderParams,
    rng: np.random.Generator,
    trace: dict | None = None,
) -> CoIncidenceMatrix:
    """Autoregressively sample rows conditioned on the encoded cells.

    Each of the `n_new_cell` passes visits every row of `h_enc`; invalid
    rows are resampled from the same root up to the attempt cap and then
    emitted as zero rows. Zero rows are discarded from the result.
    """
    data = h_enc.data if isinstance(h_enc, Tensor) else np.asarray(h_enc)
    with ad.no_grad():
        rows: list[tuple[int, ...]] = []
        history: list[Tensor] = []
        g = ad.constant(np.zeros((1, params.hidden)))
        for _ in range(hp.n_new_cell):
            for r in range(data.shape[0]):
                h_row = ad.constant(data[r : r + 1])
                h_root = apply_mlp(params.mlp_cat, ad.concat([h_row, g], axis=1))
                g_new = None
                for _attempt in range(hp.max_resample_attempts):
                    row, g_new = sample_row(h_root, num_cols, hp, params, rng, trace=trace)
                    if _row_valid(int(row.sum()), hp):
                        break
                else:
                    row = np.zeros(num_cols, dtype=np.int64)
                if row.sum() > 0:
                    rows.append(tuple(np.flatnonzero(row).tolist()))
                history.append(g_new)
                g = attention_summarize(history, params.summarizer)
        return CoIncidenceMatrix(rows, num_cols)


def predict_next_cc(
    cc: CombinatorialComplex,
    enc_params: EncoderParams,
    dec_rank1: DecoderParams,
    dec_rank2: DecoderParams,
    rng: np.random.Generator,
    hp_rank1: DecoderHyperparams = RANK1_HYPERPARAMS,
    hp_rank2: DecoderHyperparams = RANK2_HYPERPARAMS,
    mats: CcMatrices | None = None,
) -> CombinatorialComplex:
    """Encode a CC and sample the next timestep's 1- and 2-cells.

    Node features (when present) are carried over from the conditioning
    timestep so multi-step rollouts keep a valid input signal.
    """
    with ad.no_grad():
        h1, h2 = encode_cc(cc, enc_params, mats)
        rows1 = sample_incidence_matrix(h1, cc.num_nodes, hp_rank1, dec_rank1, rng)
        rows2 = sample_incidence_matrix(h2, cc.num_nodes, hp_rank2, dec_rank2, rng)
    return from_co_incidence(rows1, rows2, cc.num_nodes, cc.node_features)


def _interval_has_one(bits: np.ndarray, node: tuple[int, int]) -> bool:
    lo, hi = node
    return bool(bits[lo - 1 : hi].any())


def _gate_value_tensor(mlp, h, hp, rng) -> Tensor:
    """Gate value as a tensor: raw sigmoid, or a relaxed-Bernoulli sample
    (reparameterized logistic noise) in stochastic mode."""
    z = affine(mlp, h)
    if hp.traversal_mode == "stochastic":
        u = rng.random()
        noise = math.log(u) - math.log1p(-u)
        z = ad.mul_scalar(ad.add(z, ad.constant(np.array([[noise]]))), 1.0 / hp.temperature)
    return ad.sigmoid(z)


def _forced_walk(h, c, node, bits, state, hp, params, rng, terms):
    """Walk the tree along the target row: descend into a half iff it
    contains a 1; collect (gate value, indicator) and (leaf value, bit)
    pairs. Mirrors the sampler's early return once n_max ones are set."""
    if state["ones"] >= hp.n_max:
        return h, c
    lo, hi = node
    if lo == hi:
        bit = float(bits[lo - 1])
        terms.append((apply_mlp(params.mlp_leaf, h), bit))
        if bit:
            state["ones"] += 1
        return h, c
    h_l = c_l = h_r = c_r = None
    label_left = _interval_has_one(bits, left_child(node))
    terms.append((_gate_value_tensor(params.mlp_left, h, hp, rng), float(label_left)))
    if label_left:
        h0, c0 = recurrent_cell(h, h, c, params.rec)
        h_l, c_l = _forced_walk(h0, c0, left_child(node), bits, state, hp, params, rng, terms)
    label_right = _interval_has_one(bits, right_child(node))
    terms.append((_gate_value_tensor(params.mlp_right, h, hp, rng), float(label_right)))
    if label_right:
        h0, c0 = recurrent_cell(h, h, c, params.rec)
        h_r, c_r = _forced_walk(h0, c0, right_child(node), bits, state, hp, params, rng, terms)
    return tree_cell(h_l, c_l, h_r, c_r, params.tree)


def _soft_walk(h, c, node, hp, params, rng):
    """Full-tree soft row: each entry is the product of the gate values on
    its root path times the leaf probability."""
    lo, hi = node
    if lo == hi:
        p = apply_mlp(params.mlp_leaf, h)
        return p, h, c
    gate_l = _gate_value_tensor(params.mlp_left, h, hp, rng)
    h0, c0 = recurrent_cell(h, h, c, params.rec)
    piece_l, h_l, c_l = _soft_walk(h0, c0, left_child(node), hp, params, rng)
    gate_r = _gate_value_tensor(params.mlp_right, h, hp, rng)
    h0, c0 = recurrent_cell(h, h, c, params.rec)
    piece_r, h_r, c_r = _soft_walk(h0, c0, right_child(node), hp, params, rng)
    piece = ad.concat([ad.mul(gate_l, piece_l), ad.mul(gate_r, piece_r)], axis=1)
    h_comb, c_comb = tree_cell(h_l, c_l, h_r, c_r, params.tree)
    return piece, h_comb, c_comb


def teacher_forced_loss(
    h_enc: Tensor,
    target: CoIncidenceMatrix,
    mode: str,
    hp: DecoderHyperparams,
    params: DecoderParams,
    rng: np.random.Generator | None = None,
    eps: float = 0.1,
    sinkhorn_iters: int = 50,
) -> Tensor:
    """Differentiable training loss for one rank's target matrix.

    "bce" scores the forced traversal's gates and visited leaves against
    the target rows one-to-one (the shorter side is padded with zero rows,
    so extra target rows are walked from a zero cell encoding). The
    Sinkhorn-cosine mode ("sc") emits one soft row per encoded cell and
    scores the padded soft rows against the target through the
    row-matching loss; the transport plan is treated as a constant so
    gradients flow only through the cost matrix.
    """
    if mode not in ("bce", "sc"):
        raise ValueError(f"unknown loss mode {mode!r}")
    if hp.traversal_mode == "stochastic" and rng is None:
        raise ValueError("stochastic traversal needs an rng")
    num_cols = target.num_cols
    target_dense = target.to_dense()
    n_enc = h_enc.shape[0]
    n_target = target_dense.shape[0]
    zero_scalar = ad.constant(np.zeros((1, 1)))

    history: list[Tensor] = []
    g = ad.constant(np.zeros((1, params.hidden)))
    zero_row = ad.constant(np.zeros((1, params.hidden)))

    if mode == "bce":
        passes = max(n_enc, n_target)
        if passes == 0:
            return zero_scalar
        terms: list[tuple[Tensor, float]] = []
        for k in range(passes):
            h_row = ad.slice_rows(h_enc, k, k + 1) if k < n_enc else zero_row
            h_root = apply_mlp(params.mlp_cat, ad.concat([h_row, g], axis=1))
            bits = (
                target_dense[k]
                if k < n_target
                else np.zeros(num_cols, dtype=np.float64)
            )
            c0 = ad.constant(np.zeros((1, params.hidden)))
            state = {"ones": 0}
            h_fin, _ = _forced_walk(
                h_root, c0, (1, num_cols), bits, state, hp, params, rng, terms
            )
            history.append(h_fin)
            g = attention_summarize(history, params.summarizer)
        probs = ad.concat([t for t, _ in terms], axis=0)
        labels = np.array([[label] for _, label in terms])
        return ad.bce_scalar(probs, labels)

    # Sinkhorn-cosine over soft rows.
    if n_enc == 0 and n_target == 0:
        return zero_scalar
    soft_rows: list[Tensor] = []
    for k in range(n_enc):
        h_row = ad.slice_rows(h_enc, k, k + 1)
        h_root = apply_mlp(params.mlp_cat, ad.concat([h_row, g], axis=1))
        c0 = ad.constant(np.zeros((1, params.hidden)))
        piece, h_fin, _ = _soft_walk(h_root, c0, (1, num_cols), hp, params, rng)
        soft_rows.append(piece)
        history.append(h_fin)
        g = attention_summarize(history, params.summarizer)
    n_pad = max(n_enc, n_target)
    if soft_rows:
        pred = ad.concat(soft_rows, axis=0)
        if n_enc < n_pad:
            pred = ad.concat(
                [pred, ad.constant(np.zeros((n_pad - n_enc, num_cols)))], axis=0
            )
    else:
        pred = ad.constant(np.zeros((n_pad, num_cols)))
    target_padded = pad_rows(target_dense, n_pad)
    cost = ad.cosine_rowwise(pred, target_padded)
    plan = sinkhorn_plan(cost.data, eps=eps, iters=sinkhorn_iters)
    return ad.mul_scalar(ad.reduce_sum(ad.mul(cost, ad.constant(plan))), float(n_pad))


def for_sampling(hp: DecoderHyperparams, mode: str) -> DecoderHyperparams:
    """Copy of the hyperparameters with a different traversal mode."""
    return replace(hp, traversal_mode=mode)
