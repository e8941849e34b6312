"""
Per-domain encoding densities on a shared finite grid.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from engine.errors import InputError, UndefinedPosteriorError
from graphs.domain_graph import DomainGraph

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-9
PROJECTION_NOTE = (
    "encodings were projected onto their top-2 principal components; "
    "conditions checked on the projection are necessary, not sufficient"
)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """
    N x M mass matrix: row i is p_i(e) over M bins.

    ``weights`` is p(u); uniform unless the estimator was allowed to reweight
    by empirical domain frequencies.
    """
    masses: np.ndarray
    weights: Optional[np.ndarray] = None
    grid: Dict[str, Any] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        masses = np.array(self.masses, dtype=np.float64)
        if masses.ndim != 2 or masses.shape[0] < 1 or masses.shape[1] < 1:
            raise InputError(f"masses must be an N x M matrix, got shape {masses.shape}")
        if not np.all(np.isfinite(masses)) or np.any(masses < 0):
            raise InputError("masses must be finite and non-negative")
        sums = masses.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SIMPLEX_TOLERANCE):
            raise InputError(f"every domain's masses must sum to 1, got {sums.tolist()}")
        n = masses.shape[0]
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.array(self.weights, dtype=np.float64)
            if weights.shape != (n,) or np.any(weights < 0) or abs(weights.sum() - 1.0) > SIMPLEX_TOLERANCE:
                raise InputError("domain weights must be a probability vector of length N")
        masses.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def n_domains(self) -> int:
        return int(self.masses.shape[0])

    @property
    def n_bins(self) -> int:
        return int(self.masses.shape[1])

    @property
    def is_uniform_weighted(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.n_domains, rtol=0.0, atol=1e-15))

    def marginal(self) -> np.ndarray:
        """p(e) = sum_i p(u=i) p_i(e)."""
        return self.weights @ self.masses

    def support(self) -> np.ndarray:
        """Indices of bins with positive marginal mass."""
        return np.flatnonzero(self.marginal() > 0)

    def posterior(self, bin_index: int) -> np.ndarray:
        """p(u|e) at one bin."""
        if not 0 <= bin_index < self.n_bins:
            raise InputError(f"bin {bin_index} out of range [0, {self.n_bins})")
        p_e = self.marginal()[bin_index]
        if p_e <= 0:
            raise UndefinedPosteriorError(f"bin {bin_index} has zero marginal mass")
        return self.weights * self.masses[:, bin_index] / p_e

    def posteriors(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns:
            (support bin indices, N x |support| posterior matrix)
        """
        support = self.support()
        p_e = self.marginal()[support]
        q = self.weights[:, None] * self.masses[:, support] / p_e[None, :]
        return support, q

    def ensure_matches(self, graph: DomainGraph) -> "DensityEstimate":
        if graph.n_domains != self.n_domains:
            raise InputError(f"density has {self.n_domains} domains but the graph has {graph.n_domains}")
        return self

    # ------------------------------------------------------------------
    # JSON
    # ------------------------------------------------------------------

    def to_json(self) -> dict:
        document = {"masses": self.masses.tolist(), "grid": self.grid, "notes": list(self.notes)}
        if not self.is_uniform_weighted:
            document["weights"] = self.weights.tolist()
        return document

    @classmethod
    def from_json(cls, document: dict) -> "DensityEstimate":
        try:
            return cls(
                masses=np.asarray(document["masses"], dtype=np.float64),
                weights=document.get("weights"),
                grid=document.get("grid", {"bins": len(document["masses"][0])}),
                notes=tuple(document.get("notes", ())),
            )
        except (KeyError, TypeError, IndexError, ValueError) as e:
            raise InputError(f"density document is malformed: {e}") from None


def load_density_document(path: Union[str, Path]) -> Tuple[DensityEstimate, DomainGraph]:
    """Read ``{"graph": {"n": N, "edges": [...]}, "masses": [[...]], "weights": [...]}``."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"density file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        document = json.load(fh)
    if "graph" not in document:
        raise InputError(f"{path} has no 'graph' entry")
    graph = DomainGraph.from_json(document["graph"])
    density = DensityEstimate.from_json(document).ensure_matches(graph)
    return density, graph


def write_density_document(density: DensityEstimate, graph: DomainGraph, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = density.to_json()
    document["graph"] = graph.to_json()
    with path.open("w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=2)
    return path


def random_density(n_domains: int, n_bins: int, rng: np.random.Generator) -> DensityEstimate:
    """Independent Dirichlet(1) mass vectors per domain."""
    if n_domains < 1 or n_bins < 1:
        raise InputError("random_density needs n_domains >= 1 and n_bins >= 1")
    masses = rng.dirichlet(np.ones(n_bins), size=n_domains)
    # renormalise away floating drift so rows sum to 1 within the simplex tolerance
    masses = masses / masses.sum(axis=1, keepdims=True)
    return DensityEstimate(masses, grid={"bins": n_bins})


# ----------------------------------------------------------------------
# histogram estimation
# ----------------------------------------------------------------------

def _project_top2(pooled: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = pooled.mean(axis=0)
    _, _, vt = np.linalg.svd(pooled - mean, full_matrices=False)
    components = vt[:2].T
    return mean, components


def estimate_density(
    encodings: Sequence[np.ndarray],
    bins: int = 32,
    margin: float = 0.05,
    balance_tolerance: float = 0.10,
    allow_reweight: bool = False,
) -> DensityEstimate:
    """
    Normalised per-domain histograms of encodings on one shared grid.

    Args:
        encodings: One (n_i, d) array per domain
        bins: Bins per axis
        margin: Relative padding of the pooled range on each axis
        balance_tolerance: Allowed relative spread of per-domain counts under uniform p(u)
        allow_reweight: Use empirical p(u) instead of failing on unbalanced domains

    Returns:
        DensityEstimate with grid edges in ``grid["edges"]``
    """
    if bins < 1:
        raise InputError(f"bins must be >= 1, got {bins}")
    if not encodings:
        raise InputError("no domains given")
    arrays = []
    for i, e in enumerate(encodings):
        e = np.asarray(e, dtype=np.float64)
        if e.ndim == 1:
            e = e.reshape(-1, 1)
        if e.shape[0] == 0:
            raise InputError(f"domain {i} has no encodings")
        if not np.all(np.isfinite(e)):
            raise InputError(f"domain {i} has non-finite encodings")
        arrays.append(e)
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise InputError(f"encodings differ in dimension: {sorted(dims)}")

    notes = []
    pooled = np.vstack(arrays)
    projected = pooled.shape[1] > 2
    if projected:
        mean, components = _project_top2(pooled)
        arrays = [(a - mean) @ components for a in arrays]
        pooled = np.vstack(arrays)
        notes.append(PROJECTION_NOTE)

    lo = pooled.min(axis=0)
    hi = pooled.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    ranges = [(float(l - margin * s), float(h + margin * s)) for l, h, s in zip(lo, hi, span)]

    masses = []
    edges = None
    for a in arrays:
        counts, edges = np.histogramdd(a, bins=[bins] * a.shape[1], range=ranges)
        masses.append(counts.ravel() / a.shape[0])

    counts = np.array([a.shape[0] for a in arrays], dtype=np.float64)
    spread = (counts.max() - counts.min()) / counts.max()
    weights = None
    if spread > balance_tolerance:
        if not allow_reweight:
            raise InputError(
                f"domain sample counts differ by {spread:.1%} (> {balance_tolerance:.0%}); "
                "uniform p(u) does not hold, pass allow_reweight to use empirical p(u)"
            )
        weights = counts / counts.sum()
        notes.append("p(u) reweighted by empirical domain frequencies")

    grid = {
        "bins_per_axis": bins,
        "axes": len(ranges),
        "ranges": [list(r) for r in ranges],
        "edges": [e.tolist() for e in edges],
        "projected": projected,
    }
    return DensityEstimate(np.vstack(masses), weights=weights, grid=grid, notes=tuple(notes))
