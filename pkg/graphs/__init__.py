"""Domain graphs and graph-informed node embeddings."""
from graphs.domain_graph import (
    DomainGraph,
    UnitVectorSet,
    bfs_hops,
    binary_entropy,
    make_chain,
    make_clique,
    make_star,
    mean_edge_density,
    optimum_disc_loss,
    sample_dg_graph,
)
from graphs.embeddings import NodeEmbeddingTable, pretrain_embeddings

__all__ = [
    "DomainGraph",
    "NodeEmbeddingTable",
    "UnitVectorSet",
    "bfs_hops",
    "binary_entropy",
    "make_chain",
    "make_clique",
    "make_star",
    "mean_edge_density",
    "optimum_disc_loss",
    "pretrain_embeddings",
    "sample_dg_graph",
]
