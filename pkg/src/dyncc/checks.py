"""Finite-difference verification suite for everything differentiable.

Each check builds a small random instance, wires a scalar readout, and
compares reverse-mode gradients against central differences. The suite is
what the `gradcheck` CLI command runs and what the gradient acceptance
test asserts; all checks must come in below the shared tolerance.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import grad_check
from .cc import Graph, co_incidence
from .decoder import DecoderHyperparams, init_decoder_params, teacher_forced_loss
from .encoder import encode_cc, init_encoder_params, neighborhood_matrices
from .lifting import clique_lift
from .nn import (
    AttentionEncoderParams,
    MlpParams,
    RecurrentCellParams,
    TreeCellParams,
    apply_mlp,
    attention_summarize,
    named_tensors,
    recurrent_cell,
    tree_cell,
)
from .training import _rng

GRAD_TOL = 1e-4


def _param(rng, rows, cols):
    return ad.parameter(rng.standard_normal((rows, cols)))


def _op_checks(rng):
    checks = []

    x = _param(rng, 3, 4)
    w = _param(rng, 4, 2)
    checks.append(("matmul", lambda: ad.reduce_sum(ad.matmul(x, w)), [x, w]))

    a = _param(rng, 3, 4)
    b = _param(rng, 1, 4)  # broadcast over rows
    checks.append(("add_broadcast", lambda: ad.reduce_sum(ad.mul(ad.add(a, b), ad.add(a, b))), [a, b]))

    u = _param(rng, 3, 1)
    v = _param(rng, 1, 5)
    checks.append(("mul_broadcast", lambda: ad.reduce_sum(ad.mul(u, v)), [u, v]))

    c1 = _param(rng, 2, 3)
    c2 = _param(rng, 2, 3)
    checks.append(
        ("concat_rows", lambda: ad.reduce_sum(ad.tanh(ad.concat([c1, c2], axis=0))), [c1, c2])
    )
    checks.append(
        ("concat_cols", lambda: ad.reduce_sum(ad.sigmoid(ad.concat([c1, c2], axis=1))), [c1, c2])
    )
    checks.append(("transpose", lambda: ad.reduce_sum(ad.mul(ad.transpose(c1), ad.transpose(c1))), [c1]))
    checks.append(("slice_rows", lambda: ad.reduce_sum(ad.slice_rows(x, 1, 3)), [x]))
    checks.append(("slice_cols", lambda: ad.reduce_sum(ad.slice_cols(x, 1, 4)), [x]))

    y = _param(rng, 3, 3)
    checks.append(("leaky_relu", lambda: ad.reduce_sum(ad.leaky_relu(y, 0.01)), [y]))
    checks.append(("sigmoid", lambda: ad.reduce_sum(ad.sigmoid(y)), [y]))
    checks.append(("tanh", lambda: ad.reduce_sum(ad.tanh(y)), [y]))
    checks.append(("reduce_mean", lambda: ad.reduce_mean(ad.mul(y, y)), [y]))
    checks.append(("mul_scalar", lambda: ad.mul_scalar(ad.reduce_sum(y), 2.5), [y]))
    checks.append(("add_n", lambda: ad.reduce_sum(ad.add_n([y, y, ad.tanh(y)])), [y]))

    mask = np.array(
        [[True, True, False, True], [False, False, False, False], [True, False, True, True]]
    )
    s = _param(rng, 3, 4)
    readout = ad.constant(rng.standard_normal((4, 1)))
    checks.append(
        (
            "masked_row_softmax",
            lambda: ad.reduce_sum(ad.matmul(ad.masked_row_softmax(s, mask), readout)),
            [s],
        )
    )

    logits = _param(rng, 4, 3)
    targets = (rng.random((4, 3)) < 0.5).astype(float)
    checks.append(
        ("bce_scalar", lambda: ad.bce_scalar(ad.sigmoid(logits), targets), [logits])
    )

    pred = _param(rng, 3, 5)
    ref = np.vstack([rng.random((2, 5)), np.zeros((1, 5))])  # includes a zero pad row
    checks.append(
        ("cosine_rowwise", lambda: ad.reduce_sum(ad.cosine_rowwise(ad.sigmoid(pred), ref)), [pred])
    )
    return checks


def _module_checks(rng):
    checks = []
    hidden = 6

    # Three stacked affine+activation layers.
    l1 = MlpParams.create(rng, 5, hidden, "tanh")
    l2 = MlpParams.create(rng, hidden, hidden, "tanh")
    l3 = MlpParams.create(rng, hidden, 1, "sigmoid")
    x = ad.constant(rng.standard_normal((4, 5)))

    def mlp_loss():
        return ad.reduce_sum(apply_mlp(l3, apply_mlp(l2, apply_mlp(l1, x))))

    checks.append(("mlp_3_layer", mlp_loss, [l1.w, l1.b, l2.w, l2.b, l3.w, l3.b]))

    rec = RecurrentCellParams.create(rng, hidden, hidden)
    xs = [ad.constant(rng.standard_normal((1, hidden))) for _ in range(3)]

    def rec_loss():
        h = ad.constant(np.zeros((1, hidden)))
        c = ad.constant(np.zeros((1, hidden)))
        for step in xs:
            h, c = recurrent_cell(step, h, c, rec)
        return ad.reduce_sum(h)

    checks.append(("recurrent_cell_unrolled", rec_loss, [rec.w, rec.b]))

    tree = TreeCellParams.create(rng, hidden)
    leaves = [ad.constant(rng.standard_normal((1, hidden))) for _ in range(4)]

    def tree_loss():
        h1, c1 = tree_cell(leaves[0], None, leaves[1], None, tree)
        h2, c2 = tree_cell(leaves[2], None, leaves[3], None, tree)
        h, _c = tree_cell(h1, c1, h2, c2, tree)
        return ad.reduce_sum(h)

    checks.append(("tree_cell_depth3", tree_loss, [tree.w, tree.b]))

    summ = AttentionEncoderParams.create(rng, hidden)
    hist = [ad.constant(rng.standard_normal((1, hidden))) for _ in range(3)]
    checks.append(
        (
            "attention_summarize",
            lambda: ad.reduce_sum(attention_summarize(hist, summ)),
            [summ.wq, summ.wk, summ.wv],
        )
    )
    return checks


def _pipeline_checks(rng):
    checks = []
    hidden = 7

    # Full encoder (both levels) on a small lifted graph with a triangle.
    g = Graph(5, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)])
    cc = clique_lift(g)
    mats = neighborhood_matrices(cc)
    enc = init_encoder_params(_rng([7, 1]), d0=5, hidden=hidden)
    enc_params = _collect(enc)
    read1 = ad.constant(rng.standard_normal((hidden, 1)))
    read2 = ad.constant(rng.standard_normal((hidden, 1)))

    def encoder_loss():
        h1, h2 = encode_cc(cc, enc, mats)
        return ad.add(
            ad.reduce_sum(ad.matmul(h1, read1)), ad.reduce_sum(ad.matmul(h2, read2))
        )

    checks.append(("encoder_two_levels", encoder_loss, enc_params))

    # Teacher-forced decoder losses on a 4-node instance.
    hidden_dec = 8
    dec = init_decoder_params(_rng([7, 2]), hidden_dec)
    dec_params = _collect(dec)
    h_enc = ad.constant(rng.standard_normal((3, hidden_dec)))
    g4 = Graph(4, [(0, 1), (1, 2), (2, 3)])
    target = co_incidence(clique_lift(g4), 1)
    hp_det = DecoderHyperparams(n_max=2, traversal_mode="deterministic")

    checks.append(
        (
            "decoder_bce_deterministic",
            lambda: teacher_forced_loss(h_enc, target, "bce", hp_det, dec),
            dec_params,
        )
    )

    # The Sinkhorn-cosine loss is differentiated with the transport plan
    # held constant, so the finite-difference oracle must evaluate the same
    # plan-frozen function: the first call caches the plan, later calls
    # (the +/- step evaluations) reuse it.
    from . import decoder as decoder_mod

    plan_cache: dict = {}
    original_plan = decoder_mod.sinkhorn_plan

    def caching_plan(cost, eps, iters=50):
        if "plan" not in plan_cache:
            plan_cache["plan"] = original_plan(cost, eps=eps, iters=iters)
        return plan_cache["plan"]

    def sc_frozen_loss():
        decoder_mod.sinkhorn_plan = caching_plan
        try:
            return teacher_forced_loss(h_enc, target, "sc", hp_det, dec)
        finally:
            decoder_mod.sinkhorn_plan = original_plan

    checks.append(("decoder_sc_plan_frozen", sc_frozen_loss, dec_params))

    hp_sto = DecoderHyperparams(n_max=2, traversal_mode="stochastic")

    def stochastic_loss():
        # Frozen noise: the rng is reseeded on every call so both central
        # difference evaluations see identical relaxed-Bernoulli draws.
        rng_noise = _rng([7, 3])
        return teacher_forced_loss(h_enc, target, "bce", hp_sto, dec, rng_noise)

    checks.append(("decoder_bce_stochastic", stochastic_loss, dec_params))
    return checks


def _collect(obj):
    return [t for _, t in named_tensors(obj)]


def run_grad_checks(step: float = 1e-5) -> list[tuple[str, float]]:
    """Run every check; returns (name, max relative error) pairs."""
    rng = _rng([11, 0])
    results = []
    for name, f, params in _op_checks(rng) + _module_checks(rng) + _pipeline_checks(rng):
        results.append((name, grad_check(f, params, step)))
    return results
