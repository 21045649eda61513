"""Dynamic combinatorial-complex modeling: data model, lifting, generators,
matching losses, attention encoder, tree decoder, training and evaluation."""

__version__ = "0.1.0"

from .cc import (  # noqa: F401
    CcSeries,
    CoIncidenceMatrix,
    CombinatorialComplex,
    Graph,
    GraphSeries,
    adjacency,
    co_incidence,
    coadjacency,
    from_co_incidence,
    incidence,
    skeleton,
    validate,
)
from .lifting import LiftConfig, clique_lift, enumerate_cliques, lift_series  # noqa: F401
from .matching import hungarian, pairwise_bce, pairwise_cosine, rwpl, sinkhorn  # noqa: F401
