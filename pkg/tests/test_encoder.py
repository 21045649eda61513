import numpy as np
import pytest

import dyncc.autodiff as ad
from dyncc.cc import CombinatorialComplex, Graph
from dyncc.encoder import (
    EqualAttentionParams,
    UnequalAttentionParams,
    cc_attention_equal,
    cc_attention_unequal,
    encode_cc,
    init_cochains,
    init_encoder_params,
    neighborhood_matrices,
)
from dyncc.lifting import clique_lift
from conftest import rng_for
from test_cc_core import EXAMPLE_EDGES


def leaky(x, slope=0.01):
    return np.where(x > 0, x, slope * x)


def oracle_equal_attention(g, h, w, a, slope=0.01):
    """Scalar reimplementation: per receiving cell, softmax the pair scores
    over its neighborhood and average the transformed senders."""
    hw = h @ w
    n = g.shape[0]
    out = np.zeros((n, hw.shape[1]))
    d = hw.shape[1]
    for i in range(n):
        neigh = [j for j in range(n) if g[i, j] > 0]
        if not neigh:
            continue
        scores = [leaky(hw[i] @ a[:d, 0] + hw[j] @ a[d:, 0], slope) for j in neigh]
        scores = np.asarray(scores)
        e = np.exp(scores - scores.max())
        att = e / e.sum()
        for weight, j in zip(att, neigh):
            out[i] += weight * hw[j]
    return out


class TestEqualAttention:
    def test_single_cell_full_projection(self):
        rng = rng_for(50)
        params = EqualAttentionParams.create(rng, 3, 4)
        h = ad.constant(rng.standard_normal((1, 3)))
        out = cc_attention_equal(np.array([[1.0]]), h, params)
        assert np.allclose(out.data, h.data @ params.w.data)

    def test_zero_row_gives_zero_output(self):
        rng = rng_for(51)
        params = EqualAttentionParams.create(rng, 2, 3)
        h = ad.constant(rng.standard_normal((3, 2)))
        g = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
        out = cc_attention_equal(g, h, params)
        assert np.all(out.data[2] == 0.0)

    def test_matches_scalar_oracle_on_chain(self):
        rng = rng_for(52)
        params = EqualAttentionParams.create(rng, 4, 5)
        h = ad.constant(rng.standard_normal((3, 4)))
        g = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
        out = cc_attention_equal(g, h, params)
        want = oracle_equal_attention(g, h.data, params.w.data, params.att.data)
        assert np.allclose(out.data, want, atol=1e-12)


class TestUnequalAttention:
    def test_single_pair_both_directions_weight_one(self):
        rng = rng_for(53)
        params = UnequalAttentionParams.create(rng, 3, 2, 4)
        hs = ad.constant(rng.standard_normal((1, 3)))
        ht = ad.constant(rng.standard_normal((1, 2)))
        to_t, to_s = cc_attention_unequal(np.array([[1.0]]), hs, ht, params)
        assert np.allclose(to_t.data, hs.data @ params.w_source.data)
        assert np.allclose(to_s.data, ht.data @ params.w_target.data)

    def test_disconnected_pair_zero_outputs(self):
        rng = rng_for(54)
        params = UnequalAttentionParams.create(rng, 3, 2, 4)
        hs = ad.constant(rng.standard_normal((1, 3)))
        ht = ad.constant(rng.standard_normal((1, 2)))
        to_t, to_s = cc_attention_unequal(np.array([[0.0]]), hs, ht, params)
        assert np.all(to_t.data == 0.0) and np.all(to_s.data == 0.0)

    def test_score_formulas_and_reversed_vector(self):
        """The forward scores must equal a^T [Ws hs_p || Wt ht_q], and the
        reverse direction must equal rev(a)^T [Wt ht_q || Ws hs_p]; with an
        asymmetric vector the two score matrices differ entrywise but are
        transposes of one another."""
        rng = rng_for(55)
        d = 3
        params = UnequalAttentionParams.create(rng, 2, 2, d)
        hs = rng.standard_normal((2, 2))
        ht = rng.standard_normal((2, 2))
        ws, wt, a = params.w_source.data, params.w_target.data, params.att.data[:, 0]
        rev_a = np.concatenate([a[d:], a[:d]])
        e = np.zeros((2, 2))
        f = np.zeros((2, 2))
        for p in range(2):
            for q in range(2):
                e[p, q] = leaky(a @ np.concatenate([hs[p] @ ws, ht[q] @ wt]))
                f[q, p] = leaky(rev_a @ np.concatenate([ht[q] @ wt, hs[p] @ ws]))
        assert np.allclose(f, e.T)
        assert not np.allclose(f, e)  # asymmetric vector: entrywise different

        # the implementation's attentions row-normalize exactly these scores
        g = (rng.random((2, 2)) < 0.7).astype(float)
        to_t, to_s = cc_attention_unequal(g, ad.constant(hs), ad.constant(ht), params)
        hw_s = hs @ ws
        want_t = np.zeros((2, d))
        for q in range(2):
            neigh = [p for p in range(2) if g[q, p] > 0]
            if not neigh:
                continue
            sc = np.array([e[p, q] for p in neigh])
            w = np.exp(sc - sc.max())
            w /= w.sum()
            for weight, p in zip(w, neigh):
                want_t[q] += weight * hw_s[p]
        assert np.allclose(to_t.data, want_t, atol=1e-12)


class TestInitCochains:
    def test_identity_when_featureless(self):
        cc = CombinatorialComplex(5, [(0, 1)])
        h0, h1, h2 = init_cochains(cc)
        assert np.array_equal(h0.data, np.eye(5))
        assert h1.shape == (1, 1) and np.all(h1.data == 1.0)
        assert h2.shape == (0, 1)

    def test_features_used_when_present(self):
        feats = rng_for(56).random((4, 8))
        cc = CombinatorialComplex(4, [(0, 1)], node_features=feats)
        h0, _, _ = init_cochains(cc)
        assert np.array_equal(h0.data, feats)


class TestEncodeCc:
    def test_shapes_on_lifted_example_graph(self):
        cc = clique_lift(Graph(10, EXAMPLE_EDGES))
        params = init_encoder_params(rng_for(57), d0=10, hidden=16)
        h1, h2 = encode_cc(cc, params)
        assert h1.shape == (11, 16) and h2.shape == (3, 16)

    def test_no_2_cells_leaves_h1_defined(self):
        cc = CombinatorialComplex(4, [(0, 1), (1, 2)])
        params = init_encoder_params(rng_for(58), d0=4, hidden=8)
        h1, h2 = encode_cc(cc, params)
        assert h1.shape == (2, 8) and h2.shape == (0, 8)
        assert np.isfinite(h1.data).all()

    def test_deterministic(self):
        cc = clique_lift(Graph(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]))
        params = init_encoder_params(rng_for(59), d0=5, hidden=8)
        a1, a2 = encode_cc(cc, params)
        b1, b2 = encode_cc(cc, params)
        assert np.array_equal(a1.data, b1.data) and np.array_equal(a2.data, b2.data)

    def test_outputs_finite_on_random_ccs(self):
        from conftest import random_cc

        rng = rng_for(60)
        params = init_encoder_params(rng, d0=8, hidden=8)
        for _ in range(10):
            cc = random_cc(rng, 8)
            h1, h2 = encode_cc(cc, params)
            assert np.isfinite(h1.data).all() and np.isfinite(h2.data).all()

    def test_permutation_equivariance(self):
        """Relabeling nodes permutes the encoder outputs by the induced
        cell permutations (identity cochains relabeled alongside)."""
        rng = rng_for(61)
        g = Graph(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])
        cc = clique_lift(g)
        perm = rng.permutation(6)
        relabeled = clique_lift(Graph(6, [(perm[u], perm[v]) for u, v in g.edges]))

        # use shared node features so the node signal is permutation-aligned
        feats = rng.random((6, 5))
        cc = CombinatorialComplex(6, cc.cells1, cc.cells2, feats)
        relabeled = CombinatorialComplex(
            6, relabeled.cells1, relabeled.cells2, feats[np.argsort(perm)]
        )
        params = init_encoder_params(rng, d0=5, hidden=8)
        h1a, h2a = encode_cc(cc, params)
        h1b, h2b = encode_cc(relabeled, params)

        def cell_perm(cells_a, cells_b):
            mapped = [tuple(sorted(perm[list(c)])) for c in cells_a]
            return [list(cells_b).index(m) for m in mapped]

        p1 = cell_perm(cc.cells1, relabeled.cells1)
        p2 = cell_perm(cc.cells2, relabeled.cells2)
        assert np.allclose(h1b.data[p1], h1a.data, atol=1e-10)
        assert np.allclose(h2b.data[p2], h2a.data, atol=1e-10)
