"""
Domain graphs: construction, sampling, statistics and hop distances.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
)

from engine.errors import GraphConnectivityError, InputError

logger = logging.getLogger(__name__)

UNREACHABLE = math.inf


@dataclass(frozen=True, eq=False)
class DomainGraph:
    """Undirected, unweighted graph over N domains, held as a 0/1 adjacency matrix."""
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InputError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise InputError("adjacency entries must be 0 or 1")
        if not np.array_equal(a, a.T):
            raise InputError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise InputError("adjacency must have a zero diagonal (no self-loops)")
        a = a.astype(np.int8)
        a.flags.writeable = False
        object.__setattr__(self, "adjacency", a)

    @property
    def n_domains(self) -> int:
        return int(self.adjacency.shape[0])

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "DomainGraph":
        """Build from 0-based undirected edges."""
        if n < 1:
            raise InputError("a domain graph needs at least one domain")
        a = np.zeros((n, n), dtype=np.int8)
        for edge in edges:
            if len(edge) != 2:
                raise InputError(f"edge must have two endpoints, got {edge}")
            i, j = int(edge[0]), int(edge[1])
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"edge ({i}, {j}) out of range for {n} domains")
            if i == j:
                raise InputError(f"self-loop on domain {i} is not allowed")
            a[i, j] = a[j, i] = 1
        return cls(a)

    def edges(self) -> List[Tuple[int, int]]:
        """Undirected edges as (i, j) with i < j, sorted."""
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def neighbors(self, i: int) -> List[int]:
        return [int(j) for j in np.nonzero(self.adjacency[i])[0]]

    def to_json(self) -> dict:
        return {"n": self.n_domains, "edges": [list(e) for e in self.edges()]}

    @classmethod
    def from_json(cls, document: dict) -> "DomainGraph":
        try:
            return cls.from_edges(int(document["n"]), document["edges"])
        except KeyError as e:
            raise InputError(f"graph document is missing key {e}") from None

    def as_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_domains))
        g.add_edges_from(self.edges())
        return g

    def is_connected(self) -> bool:
        return nx.is_connected(self.as_networkx())

    # shape recognisers used by the equilibrium checkers

    def is_clique(self) -> bool:
        n = self.n_domains
        return n >= 2 and np.array_equal(self.adjacency, 1 - np.eye(n, dtype=np.int8))

    def is_star(self) -> bool:
        """Star centred on domain 0."""
        n = self.n_domains
        return n >= 2 and np.array_equal(self.adjacency, make_star(n).adjacency)

    def is_chain(self) -> bool:
        n = self.n_domains
        return n >= 2 and np.array_equal(self.adjacency, make_chain(n).adjacency)


def _check_size(n: int) -> None:
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")


def make_clique(n: int) -> DomainGraph:
    """Every pair of distinct domains is adjacent."""
    _check_size(n)
    return DomainGraph(1 - np.eye(n, dtype=np.int8))


def make_star(n: int) -> DomainGraph:
    """Domain 0 is the center, adjacent to every other domain."""
    _check_size(n)
    a = np.zeros((n, n), dtype=np.int8)
    a[0, 1:] = 1
    a[1:, 0] = 1
    return DomainGraph(a)


def make_chain(n: int) -> DomainGraph:
    """Domain i is adjacent to i-1 and i+1."""
    _check_size(n)
    return DomainGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


# ----------------------------------------------------------------------
# DG-style random graphs
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UnitVectorSet:
    """Per-domain unit vectors (a_i, b_i) = (cos w_i, sin w_i)."""
    omega: np.ndarray
    a: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=np.float64)
        if np.any(np.abs(omega) >= math.pi / 2):
            raise InputError("angles must lie in (-pi/2, pi/2)")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "a", np.cos(omega))
        object.__setattr__(self, "b", np.sin(omega))

    @classmethod
    def sample(cls, n: int, rng: np.random.Generator) -> "UnitVectorSet":
        omega = rng.uniform(-math.pi / 2, math.pi / 2, size=n)
        # uniform() is half-open; keep the open interval strictly
        omega = np.clip(omega, -math.pi / 2 + 1e-12, math.pi / 2 - 1e-12)
        return cls(omega)

    def __len__(self) -> int:
        return int(self.omega.shape[0])

    def vectors(self) -> np.ndarray:
        return np.column_stack([self.a, self.b])

    def edge_probabilities(self) -> np.ndarray:
        """0.5 a_i a_j + 0.5 b_i b_j + 0.5 for every ordered pair."""
        v = self.vectors()
        return np.clip(0.5 * (v @ v.T) + 0.5, 0.0, 1.0)


def edge_probability(vectors: UnitVectorSet, i: int, j: int) -> float:
    return float(0.5 * vectors.a[i] * vectors.a[j] + 0.5 * vectors.b[i] * vectors.b[j] + 0.5)


def _sample_edges(vectors: UnitVectorSet, rng: np.random.Generator) -> DomainGraph:
    n = len(vectors)
    probs = vectors.edge_probabilities()
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.random(iu.shape[0]) < probs[iu, ju]
    a = np.zeros((n, n), dtype=np.int8)
    a[iu[draws], ju[draws]] = 1
    a = a + a.T
    graph = DomainGraph(a)
    if not graph.is_connected():
        raise GraphConnectivityError(f"sampled graph over {n} domains is disconnected")
    return graph


def sample_dg_graph(n: int, seed: int, max_retries: int = 100) -> Tuple[DomainGraph, UnitVectorSet]:
    """
    Sample unit vectors and a connected graph with A_ij ~ Bern(0.5 a_i a_j + 0.5 b_i b_j + 0.5).

    Edges are redrawn (vectors kept) until the graph is connected.

    Args:
        n: Number of domains (>= 2)
        seed: PCG64 seed
        max_retries: Attempts before GraphConnectivityError

    Returns:
        (graph, unit vectors)
    """
    _check_size(n)
    rng = np.random.Generator(np.random.PCG64(seed))
    vectors = UnitVectorSet.sample(n, rng)

    retrying = Retrying(
        stop=stop_after_attempt(max_retries),
        retry=retry_if_exception_type(GraphConnectivityError),
        before_sleep=before_sleep_log(logger, logging.DEBUG),
        reraise=True,
    )
    graph = retrying(_sample_edges, vectors, rng)
    logger.debug(f"Sampled DG graph: {n} domains, {len(graph.edges())} edges (seed {seed})")
    return graph, vectors


# ----------------------------------------------------------------------
# statistics
# ----------------------------------------------------------------------

def mean_edge_density(g: DomainGraph) -> float:
    """E_{i,j}[A_ij] over all N^2 ordered pairs, diagonal included."""
    n = g.n_domains
    return float(g.adjacency.sum()) / float(n * n)


def binary_entropy(p: float) -> float:
    """Natural-log binary entropy with H(0) = H(1) = 0."""
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise InputError(f"binary_entropy needs p in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log1p(-p)


def binary_entropy_array(p: np.ndarray) -> np.ndarray:
    """Vectorised binary_entropy for arrays already known to lie in [0, 1]."""
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log(p) - (1.0 - p) * np.log1p(-p)
    return np.where((p == 0.0) | (p == 1.0), 0.0, h)


def optimum_disc_loss(g: DomainGraph) -> float:
    """Ceiling H(E[A_ij]) that the discriminator loss approaches at the encoder's optimum."""
    return binary_entropy(mean_edge_density(g))


def bfs_hops(g: DomainGraph, sources: Iterable[int]) -> np.ndarray:
    """
    Hop distance from each domain to its closest source (unit edge weights).

    Returns:
        Float array; sources are 0, unreachable domains are inf
    """
    source_set: Set[int] = {int(s) for s in sources}
    if not source_set:
        raise InputError("bfs_hops needs at least one source domain")
    n = g.n_domains
    for s in source_set:
        if not 0 <= s < n:
            raise InputError(f"source domain {s} out of range for {n} domains")

    depth = np.full(n, UNREACHABLE)
    lengths = nx.multi_source_dijkstra_path_length(g.as_networkx(), source_set)
    for node, hops in lengths.items():
        depth[node] = hops
    return depth


# ----------------------------------------------------------------------
# sampling helpers used by data generation and the mixture policy
# ----------------------------------------------------------------------

def select_connected_sources(g: DomainGraph, n_sources: int, rng: np.random.Generator) -> List[int]:
    """
    Pick ``n_sources`` connected domains by BFS from a random start node.

    Neighbours are visited in a random (seeded) order, so the choice is
    reproducible given the generator state.
    """
    if not 1 <= n_sources <= g.n_domains:
        raise InputError(f"n_sources must lie in [1, {g.n_domains}], got {n_sources}")
    start = int(rng.integers(g.n_domains))
    chosen = [start]
    seen = {start}
    queue = deque([start])
    while queue and len(chosen) < n_sources:
        node = queue.popleft()
        neighbors = g.neighbors(node)
        for neighbor in rng.permutation(neighbors) if neighbors else []:
            neighbor = int(neighbor)
            if neighbor not in seen:
                seen.add(neighbor)
                chosen.append(neighbor)
                queue.append(neighbor)
                if len(chosen) == n_sources:
                    break
    if len(chosen) < n_sources:
        raise GraphConnectivityError(
            f"component of domain {start} has fewer than {n_sources} domains"
        )
    return sorted(chosen)


def random_connected_subgraph(
    g: DomainGraph,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> List[int]:
    """
    Grow a connected node set from a random seed node by random frontier expansion.

    Args:
        g: Domain graph
        rng: Generator
        size: Target size; random in [2, N] when omitted

    Returns:
        Sorted node list (may be smaller than ``size`` if the component is)
    """
    n = g.n_domains
    if size is None:
        size = int(rng.integers(2, n + 1)) if n >= 2 else 1
    start = int(rng.integers(n))
    nodes = {start}
    frontier = set(g.neighbors(start))
    while frontier and len(nodes) < size:
        pick = int(rng.choice(sorted(frontier)))
        nodes.add(pick)
        frontier.discard(pick)
        frontier.update(j for j in g.neighbors(pick) if j not in nodes)
    return sorted(nodes)
