import math

import numpy as np
import pytest

import dyncc.autodiff as ad
from dyncc.autodiff import backward
from dyncc.cc import CoIncidenceMatrix, Graph, co_incidence, validate
from dyncc.decoder import (
    DecoderHyperparams,
    init_decoder_params,
    left_child,
    predict_next_cc,
    right_child,
    sample_incidence_matrix,
    sample_row,
    teacher_forced_loss,
)
from dyncc.encoder import init_encoder_params
from dyncc.lifting import clique_lift
from dyncc.nn import AdamState, adam_step, affine, named_tensors
from conftest import rng_for

# The worked 18-decision traversal over 8 indices and its sampled row.
EXAMPLE_WALK = [
    ("left", (1, 8), True), ("left", (1, 4), True), ("left", (1, 2), False),
    ("right", (1, 2), False), ("right", (1, 4), True), ("left", (3, 4), True),
    ("leaf", (3, 3), True), ("right", (3, 4), False), ("right", (1, 8), True),
    ("left", (5, 8), True), ("left", (5, 6), True), ("leaf", (5, 5), True),
    ("right", (5, 6), True), ("leaf", (6, 6), False), ("right", (5, 8), True),
    ("left", (7, 8), False), ("right", (7, 8), True), ("leaf", (8, 8), True),
]
EXAMPLE_ROW = [0, 0, 1, 0, 1, 0, 0, 1]


def scripted(walk):
    steps = iter(walk)

    def override(kind, node, prob):
        want_kind, want_node, decision = next(steps)
        assert (want_kind, want_node) == (kind, node), (
            f"expected {(want_kind, want_node)}, traversal asked {(kind, node)}"
        )
        return decision

    return override


class TestIntervals:
    def test_children_partition_exhaustively(self):
        for size in range(2, 65):
            stack = [(1, size)]
            while stack:
                lo, hi = stack.pop()
                if lo == hi:
                    continue
                l, r = left_child((lo, hi)), right_child((lo, hi))
                assert l[0] == lo and r[1] == hi
                assert l[1] + 1 == r[0]  # disjoint and covering
                assert l[0] <= l[1] and r[0] <= r[1]  # both nonempty
                stack.extend([l, r])


class TestSampleRow:
    def test_example_walk_reproduced(self):
        rng = rng_for(70)
        params = init_decoder_params(rng, 8)
        h_root = ad.constant(rng.standard_normal((1, 8)))
        row, _ = sample_row(
            h_root, 8, DecoderHyperparams(n_max=8), params, rng,
            override=scripted(EXAMPLE_WALK),
        )
        assert row.tolist() == EXAMPLE_ROW

    def test_all_leaves_refused_gives_zero_row(self):
        rng = rng_for(71)
        params = init_decoder_params(rng, 8)
        h_root = ad.constant(rng.standard_normal((1, 8)))
        override = lambda kind, node, prob: kind != "leaf"  # noqa: E731
        row, _ = sample_row(h_root, 8, DecoderHyperparams(n_max=8), params, rng, override)
        assert row.sum() == 0

    def test_nmax_one_all_gates_open_sets_leftmost_leaf(self):
        rng = rng_for(72)
        params = init_decoder_params(rng, 8)
        h_root = ad.constant(rng.standard_normal((1, 8)))
        override = lambda kind, node, prob: True  # noqa: E731
        row, _ = sample_row(h_root, 8, DecoderHyperparams(n_max=1), params, rng, override)
        assert row.tolist() == [1, 0, 0, 0, 0, 0, 0, 0]

    def test_deterministic_given_seeded_rng(self):
        params = init_decoder_params(rng_for(73), 8)
        h_root = ad.constant(rng_for(74).standard_normal((1, 8)))
        hp = DecoderHyperparams(n_max=2, traversal_mode="stochastic")
        a, _ = sample_row(h_root, 12, hp, params, rng_for(75))
        b, _ = sample_row(h_root, 12, hp, params, rng_for(75))
        assert np.array_equal(a, b)

    def test_nmax_never_exceeded(self):
        params = init_decoder_params(rng_for(76), 8)
        hp = DecoderHyperparams(n_max=2, traversal_mode="stochastic")
        rng = rng_for(77)
        for _ in range(1000):
            h_root = ad.constant(rng.standard_normal((1, 8)))
            row, _ = sample_row(h_root, 16, hp, params, rng)
            assert row.sum() <= 2

    def test_visited_nodes_bounded_by_tree_size(self):
        params = init_decoder_params(rng_for(78), 8)
        hp = DecoderHyperparams(n_max=2, traversal_mode="stochastic")
        rng = rng_for(79)
        for _ in range(100):
            h_root = ad.constant(rng.standard_normal((1, 8)))
            trace = {}
            sample_row(h_root, 16, hp, params, rng, trace=trace)
            assert trace["visited"] <= 32


class TestSampleIncidenceMatrix:
    def test_row_count_bounded_and_rows_valid(self):
        rng = rng_for(80)
        params = init_decoder_params(rng, 8)
        h_enc = ad.constant(rng.standard_normal((6, 8)))
        hp = DecoderHyperparams(n_max=2, n_new_cell=2, traversal_mode="stochastic")
        m = sample_incidence_matrix(h_enc, 10, hp, params, rng)
        assert m.num_rows <= 2 * 6
        for row in m.rows:
            assert len(row) == 2  # n_max = 2 and singletons resampled

    def test_empty_encoding_empty_matrix(self):
        rng = rng_for(81)
        params = init_decoder_params(rng, 8)
        m = sample_incidence_matrix(
            ad.constant(np.zeros((0, 8))), 10, DecoderHyperparams(n_max=2), params, rng
        )
        assert m.num_rows == 0

    def test_rank2_rows_between_2_and_nmax(self):
        rng = rng_for(82)
        params = init_decoder_params(rng, 8)
        h_enc = ad.constant(rng.standard_normal((8, 8)))
        hp = DecoderHyperparams(n_max=5, traversal_mode="stochastic")
        m = sample_incidence_matrix(h_enc, 12, hp, params, rng)
        for row in m.rows:
            assert 2 <= len(row) <= 5


class TestPredictNextCc:
    def test_output_validates_and_preserves_node_count(self):
        rng = rng_for(83)
        cc = clique_lift(Graph(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5)]))
        enc = init_encoder_params(rng, d0=6, hidden=8)
        dec1 = init_decoder_params(rng, 8)
        dec2 = init_decoder_params(rng, 8)
        hp1 = DecoderHyperparams(n_max=2, traversal_mode="stochastic")
        hp2 = DecoderHyperparams(n_max=5, traversal_mode="stochastic")
        pred = predict_next_cc(cc, enc, dec1, dec2, rng, hp1, hp2)
        assert pred.num_nodes == 6
        assert validate(pred) == []
        for cell in pred.cells1:
            assert len(cell) == 2


class TestTeacherForcedLoss:
    def test_zero_row_target_scores_two_root_gates(self):
        rng = rng_for(84)
        params = init_decoder_params(rng, 8)
        h_enc = ad.constant(rng.standard_normal((1, 8)))
        target = CoIncidenceMatrix([()], 6)
        hp = DecoderHyperparams(n_max=2)
        loss = teacher_forced_loss(h_enc, target, "bce", hp, params)

        # reproduce by hand: root = tanh MLP of [h || 0], two gates vs 0
        from dyncc.nn import apply_mlp

        g0 = ad.constant(np.zeros((1, 8)))
        h_root = apply_mlp(params.mlp_cat, ad.concat([h_enc, g0], axis=1))
        pl = 1 / (1 + math.exp(-affine(params.mlp_left, h_root).item()))
        pr = 1 / (1 + math.exp(-affine(params.mlp_right, h_root).item()))
        want = -math.log(1 - pl) - math.log(1 - pr)
        assert loss.item() == pytest.approx(want, rel=1e-9)

    def test_extra_target_rows_are_walked_from_zero_cell(self):
        rng = rng_for(85)
        params = init_decoder_params(rng, 8)
        empty = ad.constant(np.zeros((0, 8)))
        target = co_incidence(clique_lift(Graph(4, [(0, 1)])), 1)
        hp = DecoderHyperparams(n_max=2)
        loss = teacher_forced_loss(empty, target, "bce", hp, params)
        assert loss.item() > 0.0

    def test_empty_everything_gives_zero(self):
        rng = rng_for(86)
        params = init_decoder_params(rng, 8)
        empty = ad.constant(np.zeros((0, 8)))
        target = CoIncidenceMatrix([], 6)
        for mode in ("bce", "sc"):
            assert teacher_forced_loss(empty, target, mode, DecoderHyperparams(n_max=2), params).item() == 0.0

    def test_stochastic_mode_needs_rng(self):
        rng = rng_for(87)
        params = init_decoder_params(rng, 8)
        hp = DecoderHyperparams(n_max=2, traversal_mode="stochastic")
        with pytest.raises(ValueError):
            teacher_forced_loss(
                ad.constant(np.zeros((1, 8))), CoIncidenceMatrix([()], 4), "bce", hp, params
            )

    def test_bce_descends_under_adam_on_fixed_target(self):
        rng = rng_for(88)
        params = init_decoder_params(rng, 8)
        tensors = [t for _, t in named_tensors(params)]
        h_enc = ad.constant(rng.standard_normal((2, 8)))
        target = CoIncidenceMatrix([(1, 4), (0, 5)], 6)
        hp = DecoderHyperparams(n_max=2)
        state = AdamState(lr=1e-2)
        first = None
        for _ in range(60):
            for t in tensors:
                t.zero_grad()
            loss = teacher_forced_loss(h_enc, target, "bce", hp, params)
            if first is None:
                first = loss.item()
            backward(loss)
            adam_step(tensors, state)
        assert loss.item() < 0.5 * first

    def test_sc_mode_backward_runs(self):
        rng = rng_for(89)
        params = init_decoder_params(rng, 8)
        h_enc = ad.parameter(rng.standard_normal((2, 8)))
        target = CoIncidenceMatrix([(1, 4), (0, 5)], 6)
        hp = DecoderHyperparams(n_max=2)
        loss = teacher_forced_loss(h_enc, target, "sc", hp, params)
        backward(loss)
        assert h_enc.grad is not None and np.isfinite(h_enc.grad).all()
