"""
Repository for datasets on disk: samples CSV, graph JSON, metadata JSON, embedding CSV.
"""
import csv
import json
import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from engine.errors import InputError, ParseError
from graphs.domain_graph import DomainGraph
from graphs.embeddings import NodeEmbeddingTable
from storage.models import DatasetMetadata
from tasks.base_task import Dataset, TaskKind

logger = logging.getLogger(__name__)

SAMPLES_FILE = "dataset.csv"
GRAPH_FILE = "graph.json"
METADATA_FILE = "metadata.json"
EMBEDDINGS_FILE = "embeddings.csv"


def _y_columns(dataset: Dataset) -> List[str]:
    if dataset.task == TaskKind.CLASSIFICATION:
        return ["y"]
    return [f"y{i + 1}" for i in range(dataset.out_dim)]


class DatasetRepository:
    """Reads and writes one dataset directory."""

    def __init__(self, root: Union[str, Path]):
        """
        Initialize repository.

        Args:
            root: Dataset directory
        """
        self.root = Path(root)

    @property
    def samples_path(self) -> Path:
        return self.root / SAMPLES_FILE

    @property
    def graph_path(self) -> Path:
        return self.root / GRAPH_FILE

    @property
    def metadata_path(self) -> Path:
        return self.root / METADATA_FILE

    @property
    def embeddings_path(self) -> Path:
        return self.root / EMBEDDINGS_FILE

    def exists(self) -> bool:
        return self.samples_path.exists() and self.graph_path.exists() and self.metadata_path.exists()

    # ------------------------------------------------------------------
    # datasets
    # ------------------------------------------------------------------

    def save(self, dataset: Dataset) -> Path:
        """
        Write samples CSV ``x1..xd,y..,u,is_source``, graph JSON and metadata JSON.

        Returns:
            Dataset directory
        """
        self.root.mkdir(parents=True, exist_ok=True)
        x_cols = [f"x{i + 1}" for i in range(dataset.x_dim)]
        y_cols = _y_columns(dataset)
        y = dataset.y.reshape(len(dataset), -1)
        is_source = dataset.is_source

        with self.samples_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(x_cols + y_cols + ["u", "is_source"])
            for i in range(len(dataset)):
                ys = [int(v) for v in y[i]] if dataset.task == TaskKind.CLASSIFICATION else [repr(float(v)) for v in y[i]]
                writer.writerow(
                    [repr(float(v)) for v in dataset.x[i]] + ys + [int(dataset.u[i]), int(is_source[i])]
                )

        with self.graph_path.open("w", encoding="utf-8") as fh:
            json.dump(dataset.graph.to_json(), fh, indent=2)

        metadata = DatasetMetadata(
            task_name=str(dataset.metadata.get("task_name", "dataset")),
            task=dataset.task,
            n_domains=dataset.n_domains,
            source_domains=sorted(dataset.source_domains),
            x_dim=dataset.x_dim,
            out_dim=dataset.out_dim,
            seed=dataset.metadata.get("seed"),
            extra=dataset.metadata,
        )
        self.metadata_path.write_text(metadata.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"Saved dataset ({len(dataset)} samples) to {self.root}")
        return self.root

    def load(self) -> Dataset:
        """Read a dataset written by ``save``."""
        for path in (self.samples_path, self.graph_path, self.metadata_path):
            if not path.exists():
                raise InputError(f"dataset file not found: {path}")

        metadata = DatasetMetadata.model_validate_json(self.metadata_path.read_text(encoding="utf-8"))
        with self.graph_path.open("r", encoding="utf-8") as fh:
            graph = DomainGraph.from_json(json.load(fh))

        x_rows, y_rows, u_rows = [], [], []
        with self.samples_path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError("empty dataset file", line=1)
            n_x = sum(1 for h in header if h.startswith("x"))
            n_y = sum(1 for h in header if h.startswith("y"))
            if n_x != metadata.x_dim or header[-2:] != ["u", "is_source"]:
                raise ParseError(f"unexpected header {header}", line=1)
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
                try:
                    x_rows.append([float(v) for v in row[:n_x]])
                    y_rows.append([float(v) for v in row[n_x:n_x + n_y]])
                    u_rows.append(int(row[n_x + n_y]))
                except ValueError as e:
                    raise ParseError(str(e), line=reader.line_num) from None

        y = np.array(y_rows, dtype=np.float64)
        if metadata.task == TaskKind.CLASSIFICATION:
            y = y[:, 0].astype(np.int64)
        return Dataset(
            graph=graph,
            x=np.array(x_rows, dtype=np.float64),
            y=y,
            u=np.array(u_rows, dtype=np.int64),
            source_domains=frozenset(metadata.source_domains),
            task=metadata.task,
            metadata=metadata.extra,
        )

    # ------------------------------------------------------------------
    # embeddings
    # ------------------------------------------------------------------

    def save_embeddings(self, table: NodeEmbeddingTable) -> Path:
        """One row per domain, k columns, no header."""
        self.root.mkdir(parents=True, exist_ok=True)
        with self.embeddings_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            for row in table.z:
                writer.writerow([repr(float(v)) for v in row])
        logger.info(f"Saved {table.n_domains}x{table.k} embeddings to {self.embeddings_path}")
        return self.embeddings_path

    def load_embeddings(self) -> NodeEmbeddingTable:
        if not self.embeddings_path.exists():
            raise InputError(f"embedding file not found: {self.embeddings_path} (run pretrain-embed first)")
        rows = []
        with self.embeddings_path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as e:
                    raise ParseError(str(e), line=reader.line_num) from None
        if len({len(r) for r in rows}) != 1:
            raise ParseError("embedding rows have differing widths")
        return NodeEmbeddingTable(np.array(rows, dtype=np.float64))
