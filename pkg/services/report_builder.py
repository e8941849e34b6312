"""
Report builder - summary CSV, JSON detail and SVG figures for a set of runs.
"""
import csv
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from jinja2 import Environment, FileSystemLoader

from graphs.domain_graph import DomainGraph
from services.evaluation import require_tables, summarize
from storage.models import HistoryRow, MetricTable
from storage.repositories.result_repository import ResultRepository, format_value
from tasks.base_task import stream_seed

logger = logging.getLogger(__name__)

SUMMARY_KEYS = ("source", "level_1", "level_2", "level_3", "target", "overall", "worst_domain")
MISSING_COLOR = "rgb(187,187,187)"
MAP_SIZE = 480
MAP_MARGIN = 40
PLOT_WIDTH = 640
PLOT_HEIGHT = 360
PLOT_MARGIN = 50


def metric_color(value: Optional[float], metric_name: str = "accuracy", worst: Optional[float] = None) -> str:
    """
    Red-to-blue spectrum: 100% accuracy is red, 0% is blue.

    For MSE the lowest error is red and ``worst`` (the largest error shown) is blue.
    """
    if value is None or not np.isfinite(value):
        return MISSING_COLOR
    if metric_name == "accuracy":
        t = value / 100.0
    else:
        t = 1.0 - value / worst if worst else 1.0
    t = float(np.clip(t, 0.0, 1.0))
    return f"rgb({round(255 * t)},0,{round(255 * (1 - t))})"


def mean_domain_values(tables: Sequence[MetricTable]) -> Dict[int, Optional[float]]:
    """Per-domain metric averaged over the given runs; None where no run has a value."""
    collected: Dict[int, List[float]] = defaultdict(list)
    for table in tables:
        for d in table.domains:
            collected.setdefault(d.domain, [])
            if d.value is not None:
                collected[d.domain].append(d.value)
    return {domain: (float(np.mean(v)) if v else None) for domain, v in sorted(collected.items())}


def _scale(values: Sequence[float], lo: float, hi: float, start: float, length: float) -> List[float]:
    span = hi - lo if hi > lo else 1.0
    return [start + (v - lo) / span * length for v in values]


class ReportBuilder:
    """Writes the report files of a set of metric tables into one directory."""

    def __init__(self, out_dir: Union[str, Path]):
        """
        Initialize report builder.

        Args:
            out_dir: Directory receiving summary.csv, report.json and SVG figures
        """
        self.out_dir = Path(out_dir)
        self.results = ResultRepository(self.out_dir)

        # SVG figures render from templates/*.svg.j2
        template_dir = Path(__file__).parent.parent / "templates"
        self.jinja_env = Environment(
            loader=FileSystemLoader(str(template_dir)),
            autoescape=True
        )

    def _render_template(self, template_name: str, **context) -> str:
        template = self.jinja_env.get_template(template_name)
        return template.render(**context)

    # ------------------------------------------------------------------
    # tables
    # ------------------------------------------------------------------

    def write_summary(self, tables: Sequence[MetricTable], name: str = "summary.csv") -> Path:
        """One row per method with mean and std over seeds of every hop-level aggregate."""
        rows = summarize(tables)
        header = ["method", "metric_name", "seeds"]
        for key in SUMMARY_KEYS:
            header += [f"{key}_mean", f"{key}_std"]
        path = self.results.path_for(name)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                line = [row["method"], row["metric_name"], " ".join(str(s) for s in row["seeds"])]
                for column in header[3:]:
                    line.append(format_value(row.get(column)))
                writer.writerow(line)
        return path

    # ------------------------------------------------------------------
    # figures
    # ------------------------------------------------------------------

    def render_domain_map(
        self,
        graph: DomainGraph,
        values: Mapping[int, Optional[float]],
        metric_name: str,
        title: str,
        layout_seed: int = 0,
        sources: Sequence[int] = (),
    ) -> str:
        """Node-link drawing of the domain graph, each node coloured by its metric."""
        layout = nx.spring_layout(graph.as_networkx(), seed=stream_seed(layout_seed, "layout"))
        coords = np.array([layout[i] for i in range(graph.n_domains)], dtype=np.float64)
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        xs = _scale(coords[:, 0], lo[0], hi[0], MAP_MARGIN, MAP_SIZE)
        ys = _scale(coords[:, 1], lo[1], hi[1], MAP_MARGIN, MAP_SIZE)

        present = [v for v in values.values() if v is not None]
        worst = max(present) if present else None
        source_set = set(sources)
        nodes = []
        for i in range(graph.n_domains):
            value = values.get(i)
            nodes.append({
                "domain": i,
                "x": f"{xs[i]:.2f}",
                "y": f"{ys[i]:.2f}",
                "color": metric_color(value, metric_name, worst),
                "is_source": i in source_set,
                "label": "n/a" if value is None else f"{value:.1f}" if metric_name == "accuracy" else f"{value:.3f}",
            })
        edges = [
            {"x1": f"{xs[i]:.2f}", "y1": f"{ys[i]:.2f}", "x2": f"{xs[j]:.2f}", "y2": f"{ys[j]:.2f}"}
            for i, j in graph.edges()
        ]
        size = MAP_SIZE + 2 * MAP_MARGIN
        return self._render_template(
            "domain_map.svg.j2",
            title=title,
            width=size,
            height=size,
            nodes=nodes,
            edges=edges,
        )

    def render_convergence(self, history: Sequence[HistoryRow], title: str) -> str:
        """L_d per epoch against the horizontal line at the ceiling."""
        epochs = [row.epoch for row in history]
        losses = [row.l_d for row in history]
        ceiling = history[0].ceiling
        finite = [v for v in losses if np.isfinite(v)] + [ceiling]
        lo, hi = min(finite), max(finite)
        pad = 0.05 * (hi - lo) if hi > lo else 0.05 * max(abs(hi), 1.0)
        lo, hi = lo - pad, hi + pad

        inner_w = PLOT_WIDTH - 2 * PLOT_MARGIN
        inner_h = PLOT_HEIGHT - 2 * PLOT_MARGIN
        xs = _scale(epochs, min(epochs), max(epochs), PLOT_MARGIN, inner_w)

        def y_of(v: float) -> float:
            # SVG y grows downwards
            return PLOT_HEIGHT - PLOT_MARGIN - (v - lo) / (hi - lo) * inner_h

        points = " ".join(f"{x:.2f},{y_of(v):.2f}" for x, v in zip(xs, losses) if np.isfinite(v))
        return self._render_template(
            "convergence.svg.j2",
            title=title,
            width=PLOT_WIDTH,
            height=PLOT_HEIGHT,
            margin=PLOT_MARGIN,
            points=points,
            ceiling=f"{ceiling:.6f}",
            ceiling_y=f"{y_of(ceiling):.2f}",
            x_end=PLOT_WIDTH - PLOT_MARGIN,
            first_epoch=min(epochs),
            last_epoch=max(epochs),
            y_low=f"{lo:.3f}",
            y_high=f"{hi:.3f}",
        )

    # ------------------------------------------------------------------

    def emit_report(
        self,
        tables: Sequence[MetricTable],
        histories: Optional[Mapping[str, Sequence[HistoryRow]]] = None,
        graph: Optional[DomainGraph] = None,
        sources: Sequence[int] = (),
        layout_seed: int = 0,
    ) -> Dict[str, Path]:
        """
        Write summary.csv, report.json and the SVG figures.

        Args:
            tables: Metric tables of one or more (method, seed) runs
            histories: Loss histories keyed by run label, one convergence figure each
            graph: Domain graph; without it no domain maps are drawn
            sources: Source domains (outlined in the maps)
            layout_seed: Seed of the force-directed layout

        Returns:
            Written files keyed by a short name
        """
        require_tables(tables)
        files: Dict[str, Path] = {}
        files["summary"] = self.write_summary(tables)
        files["report"] = self.results.write_json(
            {
                "summary": summarize(tables),
                "runs": [t.model_dump(mode="json") for t in tables],
            },
            "report.json",
        )

        if graph is not None:
            by_method: Dict[str, List[MetricTable]] = defaultdict(list)
            for table in tables:
                by_method[table.method].append(table)
            for method, group in sorted(by_method.items()):
                svg = self.render_domain_map(
                    graph,
                    mean_domain_values(group),
                    group[0].metric_name,
                    title=f"{method}: per-domain {group[0].metric_name}",
                    layout_seed=layout_seed,
                    sources=sources,
                )
                files[f"map_{method}"] = self.results.write_text(svg, f"domain_map_{method}.svg")

        for label, history in sorted((histories or {}).items()):
            if not history:
                logger.warning(f"Skipping convergence figure for {label}: empty history")
                continue
            svg = self.render_convergence(history, title=f"{label}: L_d vs ceiling")
            files[f"convergence_{label}"] = self.results.write_text(svg, f"convergence_{label}.svg")

        logger.info(f"Report written to {self.out_dir} ({len(files)} files)")
        return files


def emit_report(
    tables: Sequence[MetricTable],
    out: Union[str, Path],
    histories: Optional[Mapping[str, Sequence[HistoryRow]]] = None,
    graph: Optional[DomainGraph] = None,
    sources: Sequence[int] = (),
    layout_seed: int = 0,
) -> Dict[str, Path]:
    return ReportBuilder(out).emit_report(tables, histories, graph, sources, layout_seed)


def history_label(method: str, seed: int) -> str:
    return f"{method}_seed{seed}"


def parse_history_label(label: str) -> Tuple[str, int]:
    method, _, seed = label.rpartition("_seed")
    return method, int(seed)
