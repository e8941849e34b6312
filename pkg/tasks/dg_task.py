"""
DG-15 / DG-60 style synthetic classification tasks, plus a three-domain chain variant.
"""
import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from engine.errors import InputError
from graphs.domain_graph import (
    DomainGraph,
    UnitVectorSet,
    make_chain,
    sample_dg_graph,
    select_connected_sources,
)
from tasks.base_task import BaseTaskBuilder, Dataset, TaskKind, split_seeds


def gaussian_means(vectors: UnitVectorSet) -> Tuple[np.ndarray, np.ndarray]:
    """mu_{i,1} = (w_i / pi)(a_i, b_i) and mu_{i,0} = -mu_{i,1}."""
    mu1 = (vectors.omega / math.pi)[:, None] * vectors.vectors()
    return mu1, -mu1


def box_muller_normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Standard normals by Box-Muller from the generator's uniforms.

    ceil(size / 2) pairs are drawn as u1 (all first) then u2; the cosine
    branch fills the first half of the output, the sine branch the rest.
    """
    size = int(np.prod(shape))
    pairs = (size + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps the log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2.0 * np.pi * u2), radius * np.sin(2.0 * np.pi * u2)])
    return z[:size].reshape(shape)


def _draw_domain(
    mu1: np.ndarray,
    per_domain: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    half = per_domain // 2
    positives = mu1 + box_muller_normal(rng, (half, 2))
    negatives = -mu1 + box_muller_normal(rng, (per_domain - half, 2))
    x = np.vstack([positives, negatives])
    y = np.concatenate([np.ones(half, dtype=np.int64), np.zeros(per_domain - half, dtype=np.int64)])
    return x, y


def _gaussian_dataset(
    graph: DomainGraph,
    vectors: UnitVectorSet,
    sources: Sequence[int],
    per_domain: int,
    rng: np.random.Generator,
    metadata: Dict[str, Any],
) -> Dataset:
    mu1, mu0 = gaussian_means(vectors)
    xs, ys, us = [], [], []
    for i in range(graph.n_domains):
        x, y = _draw_domain(mu1[i], per_domain, rng)
        xs.append(x)
        ys.append(y)
        us.append(np.full(per_domain, i, dtype=np.int64))
    metadata = dict(metadata)
    metadata.update({
        "n_classes": 2,
        "per_domain": per_domain,
        "omega": vectors.omega.tolist(),
        "a": vectors.a.tolist(),
        "b": vectors.b.tolist(),
        "mu1": mu1.tolist(),
        "mu0": mu0.tolist(),
    })
    return Dataset(
        graph=graph,
        x=np.vstack(xs),
        y=np.concatenate(ys),
        u=np.concatenate(us),
        source_domains=frozenset(sources),
        task=TaskKind.CLASSIFICATION,
        metadata=metadata,
    )


class DgTaskBuilder(BaseTaskBuilder):
    """Random domain graph from unit vectors, two Gaussians per domain."""

    def __init__(
        self,
        n_domains: int = 15,
        per_domain: int = 100,
        n_sources: int = 6,
        seed: int = 0,
        max_retries: int = 100,
    ):
        """
        Initialize builder.

        Args:
            n_domains: Number of domains N (>= 2)
            per_domain: Samples per domain (even, half per class)
            n_sources: Connected source domains (1 <= n_sources < N)
            seed: Generation seed; graph, samples and source choice derive from it
            max_retries: Graph resampling attempts until connected
        """
        super().__init__(f"dg{n_domains}", TaskKind.CLASSIFICATION)
        if n_domains < 2:
            raise InputError(f"n_domains must be >= 2, got {n_domains}")
        if per_domain < 2 or per_domain % 2:
            raise InputError(f"per_domain must be even and >= 2, got {per_domain}")
        if not 1 <= n_sources < n_domains:
            raise InputError(f"n_sources must lie in [1, {n_domains - 1}], got {n_sources}")
        self.n_domains = n_domains
        self.per_domain = per_domain
        self.n_sources = n_sources
        self.seed = seed
        self.max_retries = max_retries

    def build(self) -> Dataset:
        graph_seed, sample_seed, source_seed = split_seeds(self.seed, 3)
        graph, vectors = sample_dg_graph(self.n_domains, graph_seed, self.max_retries)
        sources = select_connected_sources(
            graph, self.n_sources, np.random.Generator(np.random.PCG64(source_seed))
        )
        rng = np.random.Generator(np.random.PCG64(sample_seed))
        dataset = _gaussian_dataset(
            graph, vectors, sources, self.per_domain, rng,
            {"task_name": self.task_name, "seed": self.seed},
        )
        self.logger.info(self.describe(dataset))
        return dataset


class Chain3TaskBuilder(BaseTaskBuilder):
    """Three domains on a chain; the two ends are sources, the middle is the target."""

    DEFAULT_OMEGA = (math.pi / 8, math.pi / 4, 3 * math.pi / 8)

    def __init__(self, per_domain: int = 200, seed: int = 0, omega: Optional[Sequence[float]] = None):
        super().__init__("chain3", TaskKind.CLASSIFICATION)
        if per_domain < 2 or per_domain % 2:
            raise InputError(f"per_domain must be even and >= 2, got {per_domain}")
        self.per_domain = per_domain
        self.seed = seed
        self.omega = tuple(omega) if omega is not None else self.DEFAULT_OMEGA
        if len(self.omega) != 3:
            raise InputError("chain3 needs exactly three angles")

    def build(self) -> Dataset:
        rng = np.random.Generator(np.random.PCG64(self.seed))
        dataset = _gaussian_dataset(
            make_chain(3), UnitVectorSet(np.asarray(self.omega)), [0, 2], self.per_domain, rng,
            {"task_name": self.task_name, "seed": self.seed},
        )
        self.logger.info(self.describe(dataset))
        return dataset


def generate_dg(n_domains: int, per_domain: int, n_sources: int, seed: int, max_retries: int = 100) -> Dataset:
    """Build a DG-style dataset; DG-15 is (15, 100, 6)."""
    return DgTaskBuilder(n_domains, per_domain, n_sources, seed, max_retries).build()


def _mu1(metadata: Dict[str, Any]) -> np.ndarray:
    try:
        return np.asarray(metadata["mu1"], dtype=np.float64)
    except KeyError:
        raise InputError("dataset metadata has no Gaussian means (mu1)") from None


def bayes_label(x: np.ndarray, u: np.ndarray, metadata: Dict[str, Any]) -> np.ndarray:
    """
    Equal-covariance Bayes rule: class 1 iff x^T mu_{u,1} > 0; ties go to class 0.

    Args:
        x: (n, 2) or (2,) features
        u: Domain index per row (or a single index)
        metadata: Dataset metadata holding ``mu1``
    """
    mu1 = _mu1(metadata)
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    u_arr = np.broadcast_to(np.asarray(u, dtype=np.int64), (x2.shape[0],))
    if u_arr.min() < 0 or u_arr.max() >= mu1.shape[0]:
        raise InputError(f"domain index out of range [0, {mu1.shape[0]})")
    scores = np.einsum("ij,ij->i", x2, mu1[u_arr])
    return (scores > 0).astype(np.int64)


def draw_eval_samples(
    metadata: Dict[str, Any],
    per_domain: int,
    seed: int,
    domains: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Fresh held-out draws from the generating Gaussians.

    Returns:
        (x, y, u) arrays
    """
    if per_domain < 2 or per_domain % 2:
        raise InputError(f"per_domain must be even and >= 2, got {per_domain}")
    mu1 = _mu1(metadata)
    domains = range(mu1.shape[0]) if domains is None else domains
    rng = np.random.Generator(np.random.PCG64(seed))
    xs, ys, us = [], [], []
    for i in domains:
        x, y = _draw_domain(mu1[i], per_domain, rng)
        xs.append(x)
        ys.append(y)
        us.append(np.full(per_domain, i, dtype=np.int64))
    return np.vstack(xs), np.concatenate(ys), np.concatenate(us)
