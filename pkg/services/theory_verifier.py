"""
Equilibrium checks for the graph discriminator game.

Given per-domain encoding densities p_i(e) on a finite grid, the optimal
discriminator outputs alpha(e, e') = E_{i~p(u|e), j~p(u|e')}[A_ij]; the game
value under that discriminator is E_{e,e'} H(alpha(e, e')) and is bounded by
H(E[A_ij]). The graph-specific checkers test the density conditions under
which the bound is attained.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from engine.errors import InputError
from graphs.domain_graph import DomainGraph, binary_entropy, binary_entropy_array, make_chain
from services.density import DensityEstimate, estimate_density
from storage.models import EquilibriumReport

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-9
DEFAULT_ANALYTIC_TOLERANCE = 1e-9
RESPONSE_EXAMPLE = {
    "posterior_e": (0.1, 0.3, 0.6),
    "posterior_e_prime": (0.7, 0.2, 0.1),
    "expected": 0.38,
}


def _check_posterior(p: np.ndarray, n: int, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (n,):
        raise InputError(f"{name} has {p.size} entries, the graph has {n} domains")
    if np.any(p < -SIMPLEX_TOLERANCE) or abs(p.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise InputError(f"{name} is not a probability vector")
    return p


def optimal_disc_response(posterior_e: Sequence[float], posterior_e_prime: Sequence[float], graph: DomainGraph) -> float:
    """sigma(D(e)^T D(e')) of the optimal discriminator: sum_ij p(i|e) p(j|e') A_ij."""
    n = graph.n_domains
    p = _check_posterior(posterior_e, n, "p(u|e)")
    q = _check_posterior(posterior_e_prime, n, "p(u|e')")
    return float(p @ graph.adjacency.astype(np.float64) @ q)


def alpha(density: DensityEstimate, graph: DomainGraph, e: int, e_prime: int) -> float:
    """alpha(e, e') at two bins; zero-mass bins raise UndefinedPosteriorError."""
    density.ensure_matches(graph)
    return optimal_disc_response(density.posterior(e), density.posterior(e_prime), graph)


def alpha_matrix(density: DensityEstimate, graph: DomainGraph) -> tuple:
    """
    Returns:
        (support bin indices, |S| x |S| matrix of alpha over the support)
    """
    density.ensure_matches(graph)
    support, q = density.posteriors()
    return support, q.T @ graph.adjacency.astype(np.float64) @ q


def expected_adjacency(density: DensityEstimate, graph: DomainGraph) -> float:
    """E_{i,j ~ p(u)}[A_ij]; equals mean_edge_density for uniform p(u)."""
    w = density.weights
    return float(w @ graph.adjacency.astype(np.float64) @ w)


def game_ceiling(density: DensityEstimate, graph: DomainGraph) -> float:
    return binary_entropy(min(max(expected_adjacency(density, graph), 0.0), 1.0))


def optimal_game_value(density: DensityEstimate, graph: DomainGraph) -> float:
    """L_d under the optimal discriminator: sum_{e,e'} p(e) p(e') H(alpha(e, e'))."""
    support, a = alpha_matrix(density, graph)
    m = density.marginal()[support]
    return float(m @ binary_entropy_array(a) @ m)


# ----------------------------------------------------------------------
# reports
# ----------------------------------------------------------------------

def _grid_info(density: DensityEstimate) -> Dict:
    info = {k: v for k, v in density.grid.items() if k != "edges"}
    info.setdefault("bins", density.n_bins)
    return info


def _report(
    kind: str,
    residual: float,
    tolerance: float,
    density: DensityEstimate,
    worst_bin: Optional[List[int]] = None,
    notes: Sequence[str] = (),
    value: Optional[float] = None,
    ceiling: Optional[float] = None,
) -> EquilibriumReport:
    residual = max(0.0, float(residual))
    return EquilibriumReport(
        kind=kind,
        residual=residual,
        tolerance=tolerance,
        verdict=residual <= tolerance,
        grid=_grid_info(density),
        notes=list(density.notes) + list(notes),
        worst_bin=worst_bin,
        value=value,
        ceiling=ceiling,
    )


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InputError(message)


def check_uniform(density: DensityEstimate, graph: DomainGraph, tol: float = DEFAULT_ANALYTIC_TOLERANCE) -> EquilibriumReport:
    """Uniform alignment (every p_i equal) attains the ceiling on any graph."""
    density.ensure_matches(graph)
    spread = density.masses.max(axis=0) - density.masses.min(axis=0)
    worst = int(np.argmax(spread))
    return _report("uniform", spread[worst], tol, density, worst_bin=[worst])


def check_clique(density: DensityEstimate, graph: DomainGraph, tol: float = DEFAULT_ANALYTIC_TOLERANCE) -> EquilibriumReport:
    """Clique: optimum iff all p_i are identical; residual max_e max_ij |p_i(e) - p_j(e)|."""
    density.ensure_matches(graph)
    _require(graph.is_clique(), "check_clique needs a clique graph")
    report = check_uniform(density, graph, tol)
    return report.model_copy(update={"kind": "clique"})


def check_star(density: DensityEstimate, graph: DomainGraph, tol: float = DEFAULT_ANALYTIC_TOLERANCE) -> EquilibriumReport:
    """Star centred at domain 0: optimum iff p_0 is the mean of the peripheral densities."""
    density.ensure_matches(graph)
    _require(graph.is_star(), "check_star needs a star graph centred at domain 0")
    masses = density.masses
    deviation = np.abs(masses[0] - masses[1:].mean(axis=0))
    worst = int(np.argmax(deviation))
    return _report("star", deviation[worst], tol, density, worst_bin=[worst])


def check_chain(density: DensityEstimate, graph: DomainGraph, tol: float = DEFAULT_ANALYTIC_TOLERANCE) -> EquilibriumReport:
    """
    Chain: optimum iff for every pair of supported bins
    sum_i [p_i(e) p_{i+1}(e') + p_i(e') p_{i+1}(e)] / (p(e) p(e')) = 2(N - 1).

    Implemented as N^2 |alpha(e, e') - E[A]|, which is that expression for uniform p(u).
    """
    density.ensure_matches(graph)
    _require(graph.is_chain(), "check_chain needs a chain graph")
    n = graph.n_domains
    support, a = alpha_matrix(density, graph)
    deviation = (n * n) * np.abs(a - expected_adjacency(density, graph))
    flat = int(np.argmax(deviation))
    i, j = np.unravel_index(flat, deviation.shape)
    notes = ["bins with zero marginal mass are excluded"]
    return _report("chain", deviation[i, j], tol, density, worst_bin=[int(support[i]), int(support[j])], notes=notes)


def check_chain3(density: DensityEstimate, graph: DomainGraph, tol: float = DEFAULT_ANALYTIC_TOLERANCE) -> EquilibriumReport:
    """Three-domain chain: optimum iff p_1 = (p_0 + p_2) / 2 (middle domain interpolates)."""
    density.ensure_matches(graph)
    _require(graph.n_domains == 3 and graph.is_chain(), "check_chain3 needs the 3-domain chain")
    masses = density.masses
    deviation = np.abs(masses[1] - 0.5 * (masses[0] + masses[2]))
    worst = int(np.argmax(deviation))
    return _report("chain3", deviation[worst], tol, density, worst_bin=[worst])


def ceiling_test(density: DensityEstimate, graph: DomainGraph, tol: float = DEFAULT_ANALYTIC_TOLERANCE) -> EquilibriumReport:
    """Gap between the game value under the optimal discriminator and H(E[A_ij])."""
    value = optimal_game_value(density, graph)
    ceiling = game_ceiling(density, graph)
    notes = []
    if value > ceiling + 1e-12:
        notes.append("game value exceeds the entropy ceiling")
    return _report("ceiling", abs(ceiling - value), tol, density, notes=notes, value=value, ceiling=ceiling)


def response_self_test(tol: float = 1e-12) -> EquilibriumReport:
    """Optimal response on the 3-chain example with posteriors (0.1, 0.3, 0.6) and (0.7, 0.2, 0.1) is 0.38."""
    value = optimal_disc_response(
        RESPONSE_EXAMPLE["posterior_e"], RESPONSE_EXAMPLE["posterior_e_prime"], make_chain(3)
    )
    residual = abs(value - RESPONSE_EXAMPLE["expected"])
    return EquilibriumReport(
        kind="optimal_response",
        residual=residual,
        tolerance=tol,
        verdict=residual <= tol,
        grid={},
        notes=["chain-3, p(u|e)=(0.1, 0.3, 0.6), p(u|e')=(0.7, 0.2, 0.1)"],
        value=value,
        ceiling=RESPONSE_EXAMPLE["expected"],
    )


# ----------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------

Checker = Callable[[DensityEstimate, DomainGraph, float], EquilibriumReport]


def applicable_checks(graph: DomainGraph) -> Dict[str, Checker]:
    """Graph checkers whose preconditions the graph satisfies."""
    checks: Dict[str, Checker] = {}
    if graph.is_clique():
        checks["clique"] = check_clique
    if graph.is_star():
        checks["star"] = check_star
    if graph.is_chain():
        checks["chain"] = check_chain
        if graph.n_domains == 3:
            checks["chain3"] = check_chain3
    return checks


def verify_density(
    density: DensityEstimate,
    graph: DomainGraph,
    tol: float = DEFAULT_ANALYTIC_TOLERANCE,
) -> List[EquilibriumReport]:
    """Every applicable graph checker plus the ceiling test."""
    density.ensure_matches(graph)
    reports = [check(density, graph, tol) for check in applicable_checks(graph).values()]
    reports.append(ceiling_test(density, graph, tol))
    for r in reports:
        logger.info(f"{r.kind}: residual={r.residual:.3e} tol={r.tolerance:g} verdict={'pass' if r.verdict else 'fail'}")
    return reports


def encoder_density(
    model,
    x: np.ndarray,
    u: np.ndarray,
    bins: int = 32,
    balance_tolerance: float = 0.10,
    allow_reweight: bool = False,
) -> DensityEstimate:
    """Histogram the model's encodings of (x, u), one row per domain."""
    encodings = []
    for d in range(model.n_domains):
        mask = u == d
        if not np.any(mask):
            raise InputError(f"domain {d} has no samples to encode")
        encodings.append(model.encode(x[mask], u[mask]))
    return estimate_density(
        encodings, bins=bins, balance_tolerance=balance_tolerance, allow_reweight=allow_reweight
    )


def all_pass(reports: Sequence[EquilibriumReport]) -> bool:
    return all(r.verdict for r in reports)


def is_attained(density: DensityEstimate, graph: DomainGraph, tol: float = 1e-9) -> bool:
    """True when the optimal game value reaches the ceiling within ``tol``."""
    return math.isclose(optimal_game_value(density, graph), game_ceiling(density, graph), rel_tol=0.0, abs_tol=tol)
