"""
Per-domain metrics, hop-level aggregation and cross-seed summaries.
"""
import logging
import math
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from engine.errors import InputError
from graphs.domain_graph import DomainGraph, bfs_hops
from storage.models import DomainMetric, MetricTable
from tasks.base_task import Dataset, LabeledArrays, TaskKind, stream_seed
from tasks.dg_task import draw_eval_samples
from tasks.tpt_task import destandardize_targets

logger = logging.getLogger(__name__)

LEVEL_KEYS = ("level_1", "level_2", "level_3")


def hop_levels(graph: DomainGraph, sources: Iterable[int]) -> Dict[str, List[int]]:
    """
    Target domains grouped by hop distance to the closest source.

    Level 3 collects every target more than two hops away (unreachable ones included).
    """
    sources = sorted(set(sources))
    hops = bfs_hops(graph, sources)
    levels: Dict[str, List[int]] = {key: [] for key in LEVEL_KEYS}
    for domain, h in enumerate(hops):
        if domain in sources:
            continue
        key = "level_1" if h == 1 else "level_2" if h == 2 else "level_3"
        levels[key].append(domain)
    return levels


def _weighted_mean(values: Sequence[Optional[float]], weights: Sequence[int]) -> Optional[float]:
    pairs = [(v, w) for v, w in zip(values, weights) if v is not None and w > 0]
    if not pairs:
        return None
    total = sum(w for _, w in pairs)
    return float(sum(v * w for v, w in pairs) / total)


def hop_level_aggregate(table: MetricTable, graph: DomainGraph, sources: Iterable[int]) -> Dict[str, Optional[float]]:
    """
    Sample-weighted mean metric over targets per hop level plus the overall target mean.

    Empty groups are reported as None.
    """
    by_domain = {d.domain: d for d in table.domains}
    levels = hop_levels(graph, sources)
    aggregates: Dict[str, Optional[float]] = {}
    targets: List[int] = []
    for key in LEVEL_KEYS:
        members = [by_domain[d] for d in levels[key] if d in by_domain]
        targets.extend(levels[key])
        aggregates[key] = _weighted_mean([m.value for m in members], [m.n_samples for m in members])
    members = [by_domain[d] for d in targets if d in by_domain]
    aggregates["target"] = _weighted_mean([m.value for m in members], [m.n_samples for m in members])
    return aggregates


def evaluation_arrays(dataset: Dataset, seed: int, draws_per_domain: int = 2000) -> LabeledArrays:
    """
    Held-out rows for evaluation.

    Generated classification tasks are scored on fresh draws from their
    Gaussians; other tasks on every row, target labels having been withheld
    from training.
    """
    if dataset.task == TaskKind.CLASSIFICATION and "mu1" in dataset.metadata:
        x, y, u = draw_eval_samples(dataset.metadata, draws_per_domain, stream_seed(seed, "evaluation"))
        return LabeledArrays(x, y, u)
    return LabeledArrays(dataset.x, dataset.y, dataset.u)


def per_domain_metrics(
    model,
    dataset: Dataset,
    method: str,
    seed: int,
    config_digest: str = "",
    eval_data: Optional[LabeledArrays] = None,
    draws_per_domain: int = 2000,
) -> MetricTable:
    """
    Accuracy (%) per domain for classification, MSE per domain for regression.

    Regression predictions and targets are mapped back to original units
    before squaring when the dataset carries standardization statistics.
    """
    data = eval_data if eval_data is not None else evaluation_arrays(dataset, seed, draws_per_domain)
    hops = bfs_hops(dataset.graph, dataset.source_domains)
    classification = dataset.task == TaskKind.CLASSIFICATION
    domains: List[DomainMetric] = []

    for d in range(dataset.n_domains):
        mask = data.u == d
        count = int(mask.sum())
        value: Optional[float] = None
        if count:
            prediction = model.predict(data.x[mask], data.u[mask])
            if classification:
                value = 100.0 * float(np.mean(prediction.classes == data.y[mask]))
            else:
                pred = prediction.outputs
                truth = np.asarray(data.y[mask], dtype=np.float64).reshape(pred.shape)
                if "y_mean" in dataset.metadata:
                    pred = destandardize_targets(pred, dataset.metadata)
                    truth = destandardize_targets(truth, dataset.metadata)
                value = float(np.mean((pred - truth) ** 2))
        hop = None if math.isinf(hops[d]) else int(hops[d])
        domains.append(DomainMetric(
            domain=d, value=value, n_samples=count, hop=hop, is_source=d in dataset.source_domains
        ))

    table = MetricTable(
        method=method,
        seed=seed,
        config_digest=config_digest,
        metric_name="accuracy" if classification else "mse",
        domains=domains,
    )
    aggregates = hop_level_aggregate(table, dataset.graph, dataset.source_domains)
    sources = [m for m in domains if m.is_source]
    aggregates["source"] = _weighted_mean([m.value for m in sources], [m.n_samples for m in sources])
    aggregates["overall"] = _weighted_mean([m.value for m in domains], [m.n_samples for m in domains])
    table.aggregates = aggregates
    logger.info(
        f"{method} seed {seed}: target {table.metric_name} "
        f"{_format(aggregates['target'])}, overall {_format(aggregates['overall'])}"
    )
    return table


def _format(value: Optional[float]) -> str:
    return "absent" if value is None else f"{value:.4f}"


def mean_std(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    """Mean and sample standard deviation (ddof=1; 0 for a single value)."""
    clean = [v for v in values if v is not None]
    if not clean:
        return None, None
    if len(clean) == 1:
        return float(clean[0]), 0.0
    return float(np.mean(clean)), float(np.std(clean, ddof=1))


def summarize(tables: Sequence[MetricTable]) -> List[Dict]:
    """
    One summary row per method: mean and std across seeds of every aggregate.

    Row keys follow ``<aggregate>_mean`` / ``<aggregate>_std`` plus the seed list.
    """
    grouped: Dict[str, List[MetricTable]] = defaultdict(list)
    for table in tables:
        grouped[table.method].append(table)
    rows = []
    for method in sorted(grouped):
        group = grouped[method]
        row: Dict = {
            "method": method,
            "metric_name": group[0].metric_name,
            "seeds": sorted(t.seed for t in group),
        }
        keys = sorted({k for t in group for k in t.aggregates})
        for key in keys:
            mean, std = mean_std([t.aggregates.get(key) for t in group])
            row[f"{key}_mean"] = mean
            row[f"{key}_std"] = std
        worst = [min((d.value for d in t.domains if d.value is not None), default=None) for t in group]
        if group[0].metric_name == "accuracy":
            row["worst_domain_mean"], row["worst_domain_std"] = mean_std(worst)
        rows.append(row)
    return rows


def require_tables(tables: Sequence[MetricTable]) -> None:
    if not tables:
        raise InputError("at least one metric table is required")
