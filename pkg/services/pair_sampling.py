"""
Batch samplers for the discriminator (mixture policy) and the labeled predictor batches.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from engine.errors import InputError
from graphs.domain_graph import random_connected_subgraph
from tasks.base_task import Dataset

logger = logging.getLogger(__name__)

UNIFORM = "uniform"
SUBGRAPH = "subgraph"


@dataclass(frozen=True, eq=False)
class DomainBatch:
    """Rows drawn for discriminator pair formation; labels are never included."""
    x: np.ndarray
    u: np.ndarray
    policy: str

    def __len__(self) -> int:
        return int(self.u.shape[0])


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return int(self.u.shape[0])


class PairSampler:
    """
    Draws discriminator batches over every domain (source and target).

    Under the mixture policy each draw flips a fair coin between:
      uniform   - each slot picks a domain uniformly, then a sample of it
      subgraph  - slots pick domains from a random connected subgraph
    A one-node subgraph falls back to the uniform policy.
    """

    def __init__(self, dataset: Dataset, policy: str = "mixture"):
        if policy not in ("mixture", UNIFORM):
            raise InputError(f"unknown pair policy '{policy}'")
        self.dataset = dataset
        self.policy = policy
        self.rows_by_domain: Dict[int, np.ndarray] = {
            d: np.flatnonzero(dataset.u == d) for d in range(dataset.n_domains)
        }

    def _draw_rows(self, domains: List[int], batch_size: int, rng: np.random.Generator) -> np.ndarray:
        slots = rng.choice(np.asarray(domains, dtype=np.int64), size=batch_size)
        rows = np.empty(batch_size, dtype=np.int64)
        for k, d in enumerate(slots):
            pool = self.rows_by_domain[int(d)]
            rows[k] = pool[rng.integers(pool.shape[0])]
        return rows

    def sample(self, batch_size: int, rng: np.random.Generator) -> DomainBatch:
        if batch_size < 2:
            raise InputError(f"pair batches need at least 2 samples, got {batch_size}")
        policy = UNIFORM
        domains = list(range(self.dataset.n_domains))
        if self.policy == "mixture" and rng.random() < 0.5:
            nodes = random_connected_subgraph(self.dataset.graph, rng)
            if len(nodes) > 1:
                policy = SUBGRAPH
                domains = nodes
        rows = self._draw_rows(domains, batch_size, rng)
        return DomainBatch(x=self.dataset.x[rows], u=self.dataset.u[rows], policy=policy)


class LabeledSampler:
    """i.i.d. batches over the pooled labeled source rows."""

    def __init__(self, dataset: Dataset):
        self.source = dataset.source_view()
        if len(self.source) == 0:
            raise InputError("dataset has no labeled source samples")

    def __len__(self) -> int:
        return len(self.source)

    def sample(self, batch_size: int, rng: np.random.Generator) -> LabeledBatch:
        n = len(self.source)
        rows = rng.choice(n, size=batch_size, replace=n < batch_size)
        return LabeledBatch(x=self.source.x[rows], y=self.source.y[rows], u=self.source.u[rows])
