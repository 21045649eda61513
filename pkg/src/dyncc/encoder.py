"""Two-level higher-order attention message passing over a CC.

Produces 256-wide embeddings for 1-cells and 2-cells. Level one pushes
messages along node adjacency and the two incidence relations (0<->1,
1<->2); level two adds within-rank attention for 1-cells (adjacency via
shared 2-cells) and 2-cells (coadjacency via shared 1-cells). Attention
between unequal ranks shares one score vector per block: the reverse
direction reads the same vector with its halves swapped, so the score of
(cell p, cell q) is one number normalized differently per direction.

Attention weights are masked softmaxes over each receiving cell's
neighborhood, so rows sum to 1 where the neighborhood is nonempty and are
identically zero where it is empty (isolated cells emit zero messages).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cc import CombinatorialComplex, adjacency, coadjacency, incidence
from .nn import HIDDEN_SIZE, glorot

__all__ = [
    "EqualAttentionParams",
    "UnequalAttentionParams",
    "HmcLevel1Params",
    "HmcLevel2Params",
    "EncoderParams",
    "CcMatrices",
    "neighborhood_matrices",
    "init_cochains",
    "cc_attention_equal",
    "cc_attention_unequal",
    "hmc_level1",
    "hmc_level2",
    "encode_cc",
    "init_encoder_params",
]

LEAKY_SLOPE = 0.01


@dataclass
class EqualAttentionParams:
    w: Tensor  # d_in x d_out
    att: Tensor  # 2*d_out x 1

    @classmethod
    def create(cls, rng, d_in: int, d_out: int):
        return cls(glorot(rng, d_in, d_out), glorot(rng, 2 * d_out, 1))


@dataclass
class UnequalAttentionParams:
    w_source: Tensor  # source d_in x d_out
    w_target: Tensor  # target d_in x d_out
    att: Tensor  # 2*d_out x 1, shared between the two directions

    @classmethod
    def create(cls, rng, d_source: int, d_target: int, d_out: int):
        return cls(
            glorot(rng, d_source, d_out),
            glorot(rng, d_target, d_out),
            glorot(rng, 2 * d_out, 1),
        )


@dataclass
class HmcLevel1Params:
    within_rank0: EqualAttentionParams
    across_01: UnequalAttentionParams
    across_12: UnequalAttentionParams


@dataclass
class HmcLevel2Params:
    within_rank0: EqualAttentionParams
    within_rank1: EqualAttentionParams
    within_rank2: EqualAttentionParams
    across_01: UnequalAttentionParams
    across_12: UnequalAttentionParams


@dataclass
class EncoderParams:
    level1: HmcLevel1Params
    level2: HmcLevel2Params
    hidden: int
    slope: float = LEAKY_SLOPE


@dataclass(frozen=True)
class CcMatrices:
    """Neighborhood matrices of one CC, computed once and shared."""

    a01: np.ndarray  # node adjacency via edges (N x N)
    b01: np.ndarray  # node-in-edge incidence (N x E)
    b12: np.ndarray  # edge-in-2-cell incidence (E x M)
    a12: np.ndarray  # edge adjacency via shared 2-cells (E x E)
    coa: np.ndarray  # 2-cell coadjacency via shared edges (M x M)


def neighborhood_matrices(cc: CombinatorialComplex) -> CcMatrices:
    return CcMatrices(
        a01=adjacency(cc, 0, 1),
        b01=incidence(cc, 0, 1),
        b12=incidence(cc, 1, 2),
        a12=adjacency(cc, 1, 1),
        coa=coadjacency(cc),
    )


def init_cochains(cc: CombinatorialComplex):
    """Initial signals: node features (or identity), ones on 1- and 2-cells."""
    if cc.node_features is not None:
        h0 = ad.constant(cc.node_features)
    else:
        h0 = ad.constant(np.eye(cc.num_nodes))
    h1 = ad.constant(np.ones((cc.num_cells(1), 1)))
    h2 = ad.constant(np.ones((cc.num_cells(2), 1)))
    return h0, h1, h2


def _pair_scores(hw_rows: Tensor, hw_cols: Tensor, att: Tensor, slope: float):
    """Score matrix s[p, q] = LeakyReLU(att_first . row_p + att_second . col_q)."""
    d = hw_rows.shape[1]
    u = ad.matmul(hw_rows, ad.slice_rows(att, 0, d))
    v = ad.matmul(hw_cols, ad.slice_rows(att, d, 2 * d))
    return ad.leaky_relu(ad.add(u, ad.transpose(v)), slope)


def cc_attention_equal(
    g: np.ndarray, h: Tensor, params: EqualAttentionParams, slope: float = LEAKY_SLOPE
) -> Tensor:
    """Attention push-forward among cells of one rank along the square
    neighborhood matrix `g`; rows of `g` index the receiving cells."""
    if g.shape[0] != g.shape[1] or g.shape[0] != h.shape[0]:
        raise ValueError(f"square matrix {g.shape} must match {h.shape[0]} cells")
    hw = ad.matmul(h, params.w)
    scores = _pair_scores(hw, hw, params.att, slope)
    att = ad.masked_row_softmax(scores, g > 0.0)
    return ad.matmul(att, hw)


def cc_attention_unequal(
    g: np.ndarray,
    h_source: Tensor,
    h_target: Tensor,
    params: UnequalAttentionParams,
    slope: float = LEAKY_SLOPE,
):
    """Attention push-forward between two ranks along `g` (targets x sources).

    Returns (message to targets, message to sources). Both directions share
    one score per (source, target) pair; each receiving side normalizes the
    scores over its own neighborhood.
    """
    if g.shape != (h_target.shape[0], h_source.shape[0]):
        raise ValueError(
            f"matrix {g.shape} must be (targets={h_target.shape[0]}, "
            f"sources={h_source.shape[0]})"
        )
    hs = ad.matmul(h_source, params.w_source)
    ht = ad.matmul(h_target, params.w_target)
    scores = _pair_scores(hs, ht, params.att, slope)  # sources x targets
    att_to_target = ad.masked_row_softmax(ad.transpose(scores), g > 0.0)
    att_to_source = ad.masked_row_softmax(scores, g.T > 0.0)
    return ad.matmul(att_to_target, hs), ad.matmul(att_to_source, ht)


def hmc_level1(mats: CcMatrices, cochains, params: HmcLevel1Params, slope: float):
    """First message-passing level; 2-cells receive only the 1->2 message."""
    h0, h1, h2 = cochains
    act = lambda t: ad.leaky_relu(t, slope)  # noqa: E731
    m00 = cc_attention_equal(mats.a01, h0, params.within_rank0, slope)
    m01, m10 = cc_attention_unequal(mats.b01.T, h0, h1, params.across_01, slope)
    m12, m21 = cc_attention_unequal(mats.b12.T, h1, h2, params.across_12, slope)
    i0 = act(ad.add(act(m00), act(m10)))
    i1 = act(ad.add(act(m01), act(m21)))
    i2 = act(act(m12))
    return i0, i1, i2


def hmc_level2(mats: CcMatrices, intermediates, params: HmcLevel2Params, slope: float):
    """Second level: within-rank attention for every rank plus fresh 0->1,
    1->0 and 1->2 messages; the 2->1 direction of the shared 1<->2 block is
    computed but feeds nothing at this level."""
    i0, i1, i2 = intermediates
    act = lambda t: ad.leaky_relu(t, slope)  # noqa: E731
    l00 = cc_attention_equal(mats.a01, i0, params.within_rank0, slope)
    l11 = cc_attention_equal(mats.a12, i1, params.within_rank1, slope)
    l22 = cc_attention_equal(mats.coa, i2, params.within_rank2, slope)
    l01, l10 = cc_attention_unequal(mats.b01.T, i0, i1, params.across_01, slope)
    l12, _l21 = cc_attention_unequal(mats.b12.T, i1, i2, params.across_12, slope)
    h0 = act(ad.add(act(l00), act(l10)))
    h1 = act(ad.add(act(l11), act(l01)))
    h2 = act(ad.add(act(l12), act(l22)))
    return h0, h1, h2


def encode_cc(
    cc: CombinatorialComplex,
    params: EncoderParams,
    mats: CcMatrices | None = None,
):
    """Run both levels and return the 1-cell and 2-cell embeddings."""
    if mats is None:
        mats = neighborhood_matrices(cc)
    cochains = init_cochains(cc)
    inter = hmc_level1(mats, cochains, params.level1, params.slope)
    _h0, h1, h2 = hmc_level2(mats, inter, params.level2, params.slope)
    return h1, h2


def init_encoder_params(
    rng: np.random.Generator, d0: int, hidden: int = HIDDEN_SIZE, slope: float = LEAKY_SLOPE
) -> EncoderParams:
    """Fresh encoder parameters for node-signal width `d0` (node count for
    identity cochains, or the feature width)."""
    level1 = HmcLevel1Params(
        within_rank0=EqualAttentionParams.create(rng, d0, hidden),
        across_01=UnequalAttentionParams.create(rng, d0, 1, hidden),
        across_12=UnequalAttentionParams.create(rng, 1, 1, hidden),
    )
    level2 = HmcLevel2Params(
        within_rank0=EqualAttentionParams.create(rng, hidden, hidden),
        within_rank1=EqualAttentionParams.create(rng, hidden, hidden),
        within_rank2=EqualAttentionParams.create(rng, hidden, hidden),
        across_01=UnequalAttentionParams.create(rng, hidden, hidden, hidden),
        across_12=UnequalAttentionParams.create(rng, hidden, hidden, hidden),
    )
    return EncoderParams(level1, level2, hidden, slope)
