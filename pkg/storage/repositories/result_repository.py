"""
Repository for run results: metrics CSV, loss-history CSV, JSON reports.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

from engine.errors import InputError, ParseError
from storage.models import EquilibriumReport, HistoryRow, MetricRow, MetricTable

logger = logging.getLogger(__name__)

METRICS_HEADER = ["method", "seed", "domain", "hop_level", "metric_name", "value"]
HISTORY_HEADER = ["epoch", "L_f", "L_d", "ceiling", "gap"]


def format_value(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _hop_label(hop: Optional[int]) -> str:
    if hop is None:
        return "unreachable"
    if hop == 0:
        return "source"
    return str(min(hop, 3))


def table_rows(table: MetricTable) -> List[MetricRow]:
    """Flatten a table: one row per domain, then one row per aggregate."""
    rows = [
        MetricRow(
            method=table.method,
            seed=table.seed,
            domain=str(d.domain),
            hop_level=_hop_label(d.hop),
            metric_name=table.metric_name,
            value=d.value,
        )
        for d in sorted(table.domains, key=lambda d: d.domain)
    ]
    for key in sorted(table.aggregates):
        rows.append(MetricRow(
            method=table.method,
            seed=table.seed,
            domain=key,
            hop_level="",
            metric_name=table.metric_name,
            value=table.aggregates[key],
        ))
    return rows


class ResultRepository:
    """Writes and reads result files under one output directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path_for(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root / name

    # ------------------------------------------------------------------

    def write_metrics(self, tables: Sequence[MetricTable], name: str = "metrics.csv") -> Path:
        """metrics CSV: method,seed,domain,hop_level,metric_name,value"""
        path = self.path_for(name)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for table in tables:
                for row in table_rows(table):
                    writer.writerow([row.method, row.seed, row.domain, row.hop_level, row.metric_name, format_value(row.value)])
        logger.info(f"Wrote metrics for {len(tables)} runs to {path}")
        return path

    def read_metrics(self, name: str = "metrics.csv") -> List[MetricRow]:
        path = self.root / name
        if not path.exists():
            raise InputError(f"metrics file not found: {path}")
        rows: List[MetricRow] = []
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != METRICS_HEADER:
                raise ParseError(f"unexpected metrics header {reader.fieldnames}", line=1)
            for record in reader:
                value = record["value"]
                rows.append(MetricRow(
                    method=record["method"],
                    seed=int(record["seed"]),
                    domain=record["domain"],
                    hop_level=record["hop_level"],
                    metric_name=record["metric_name"],
                    value=float(value) if value else None,
                ))
        return rows

    def write_history(self, rows: Iterable[HistoryRow], name: str = "history.csv") -> Path:
        """history CSV: epoch,L_f,L_d,ceiling,gap"""
        path = self.path_for(name)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HISTORY_HEADER)
            for r in rows:
                writer.writerow([r.epoch, format_value(r.l_f), format_value(r.l_d), format_value(r.ceiling), format_value(r.gap)])
        return path

    def read_history(self, name: str = "history.csv") -> List[HistoryRow]:
        path = self.root / name
        if not path.exists():
            raise InputError(f"history file not found: {path}")
        rows: List[HistoryRow] = []
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != HISTORY_HEADER:
                raise ParseError(f"unexpected history header {reader.fieldnames}", line=1)
            for record in reader:
                rows.append(HistoryRow(
                    epoch=int(record["epoch"]),
                    L_f=float(record["L_f"]) if record["L_f"] else math.nan,
                    L_d=float(record["L_d"]) if record["L_d"] else math.nan,
                    ceiling=float(record["ceiling"]),
                    gap=float(record["gap"]) if record["gap"] else math.nan,
                ))
        return rows

    def write_report(self, report: EquilibriumReport, name: Optional[str] = None) -> Path:
        """EquilibriumReport JSON {kind, residual, tolerance, verdict, grid, notes, ...}."""
        path = self.path_for(name or f"equilibrium_{report.kind}.json")
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        return path

    def write_json(self, document: Any, name: str) -> Path:
        path = self.path_for(name)
        with path.open("w", encoding="utf-8") as fh:
            json.dump(document, fh, indent=2, sort_keys=True)
        return path

    def write_text(self, text: str, name: str) -> Path:
        path = self.path_for(name)
        path.write_text(text, encoding="utf-8")
        return path

    def write_tables(self, tables: Sequence[MetricTable], name: str = "tables.json") -> Path:
        """Full per-domain detail of every run, readable by ``read_tables``."""
        return self.write_json([t.model_dump(mode="json") for t in tables], name)

    def read_tables(self, name: str = "tables.json") -> List[MetricTable]:
        return read_tables_file(self.root / name)


def read_tables_file(path: Union[str, Path]) -> List[MetricTable]:
    """Load a JSON list of metric tables (a single table object is accepted too)."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"metric tables file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {e.msg}", line=e.lineno) from None
    if isinstance(document, dict):
        document = [document]
    return [MetricTable.model_validate(item) for item in document]
