"""
Node embeddings pretrained to reconstruct the domain graph (loss L_g).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from engine.errors import InputError, TrainingDivergenceError
from engine.functional import bce_with_logit
from engine.optim import Adam
from engine.tensor import Tensor, backward
from graphs.domain_graph import DomainGraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NodeEmbeddingTable:
    """N x k matrix whose row i is the embedding z_i of domain i."""
    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64)
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
            raise InputError(f"embedding table must be a non-empty N x k matrix, got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise InputError("embedding table contains non-finite values")
        if np.unique(z, axis=0).shape[0] != z.shape[0]:
            raise InputError("embedding rows must be pairwise distinct")
        z.flags.writeable = False
        object.__setattr__(self, "z", z)

    @property
    def n_domains(self) -> int:
        return int(self.z.shape[0])

    @property
    def k(self) -> int:
        return int(self.z.shape[1])

    def rows(self, u: np.ndarray) -> np.ndarray:
        """Embeddings for an array of domain indices."""
        u = np.asarray(u)
        if u.size and (u.min() < 0 or u.max() >= self.n_domains):
            raise InputError(f"domain index out of range [0, {self.n_domains})")
        return self.z[u]


def _off_diagonal_weight(n: int) -> np.ndarray:
    w = 1.0 - np.eye(n)
    if n == 1:
        # a single domain has no pairs; weight the self-pair so the loss stays defined
        w = np.ones((1, 1))
    return w


def reconstruction_loss(g: DomainGraph, z: np.ndarray) -> float:
    """L_g averaged over ordered pairs i != j."""
    z = np.asarray(z, dtype=np.float64)
    logits = Tensor(z @ z.T)
    loss = bce_with_logit(logits, g.adjacency.astype(np.float64), weight=_off_diagonal_weight(g.n_domains))
    return loss.item()


def pretrain_embeddings(
    g: DomainGraph,
    k: int = 2,
    lr: float = 0.01,
    steps: int = 2000,
    seed: int = 0,
) -> NodeEmbeddingTable:
    """
    Fit z so that sigma(z_i^T z_j) reconstructs A_ij, by full-batch descent on L_g.

    Args:
        g: Domain graph
        k: Embedding dimension
        lr: Adam learning rate
        steps: Number of full-batch steps
        seed: PCG64 seed for the initial table

    Returns:
        Pretrained NodeEmbeddingTable
    """
    if k < 1:
        raise InputError(f"embedding dimension k must be >= 1, got {k}")
    if steps < 0:
        raise InputError(f"steps must be >= 0, got {steps}")

    rng = np.random.Generator(np.random.PCG64(seed))
    n = g.n_domains
    z = Tensor(rng.normal(0.0, 1.0, size=(n, k)), requires_grad=True)
    target = g.adjacency.astype(np.float64)
    weight = _off_diagonal_weight(n)
    optimizer = Adam([z], learning_rate=lr)

    initial = reconstruction_loss(g, z.data)
    loss_value = initial
    for step in range(steps):
        optimizer.zero_grad()
        loss = bce_with_logit(z @ z.T, target, weight=weight)
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise TrainingDivergenceError("L_g", loss_value, epoch=step)
        backward(loss)
        optimizer.step()

    final = reconstruction_loss(g, z.data)
    logger.info(f"Pretrained {n}x{k} embeddings: L_g {initial:.4f} -> {final:.4f} in {steps} steps")
    return NodeEmbeddingTable(z.data)


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties averaged)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise InputError("roc_auc needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def embedding_auc(g: DomainGraph, table: NodeEmbeddingTable) -> float:
    """ROC-AUC of sigma(z_i^T z_j) against A_ij over ordered pairs i != j."""
    probs = expit(table.z @ table.z.T)
    mask = ~np.eye(g.n_domains, dtype=bool)
    return roc_auc(probs[mask], g.adjacency[mask])
