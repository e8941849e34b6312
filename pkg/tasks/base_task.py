"""
Dataset types and the abstract base class for all task builders.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Union

import numpy as np

from engine.errors import InputError
from graphs.domain_graph import DomainGraph


class TaskKind(str, Enum):
    """Prediction task families."""
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


@dataclass(frozen=True, eq=False)
class Sample:
    """One (x, y, u) triple; y is None for unlabeled target samples."""
    x: np.ndarray
    u: int
    y: Optional[Union[int, np.ndarray]] = None

    @property
    def is_labeled(self) -> bool:
        return self.y is not None


@dataclass(eq=False)
class Dataset:
    """
    Samples partitioned into labeled source and unlabeled target domains.

    ``y`` holds every target; only rows in source domains are exposed to
    training through ``source_view``. Target rows are held out for evaluation.
    """
    graph: DomainGraph
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    source_domains: FrozenSet[int]
    task: TaskKind
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.u = np.asarray(self.u, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64 if self.task == TaskKind.CLASSIFICATION else np.float64)
        self.source_domains = frozenset(int(s) for s in self.source_domains)
        n = self.graph.n_domains

        if self.x.ndim != 2:
            raise InputError(f"x must be 2-D, got shape {self.x.shape}")
        if not (self.x.shape[0] == self.u.shape[0] == self.y.shape[0]):
            raise InputError("x, y and u must have the same number of rows")
        if not np.all(np.isfinite(self.x)):
            raise InputError("x contains non-finite values")
        if self.u.size and (self.u.min() < 0 or self.u.max() >= n):
            raise InputError(f"domain index out of range [0, {n})")
        if not self.source_domains:
            raise InputError("at least one source domain is required")
        if not self.source_domains <= set(range(n)):
            raise InputError("source domains must be valid domain indices")
        missing = set(range(n)) - set(np.unique(self.u).tolist())
        if missing:
            raise InputError(f"domains without samples: {sorted(missing)}")

    # ------------------------------------------------------------------

    @property
    def n_domains(self) -> int:
        return self.graph.n_domains

    @property
    def target_domains(self) -> FrozenSet[int]:
        return frozenset(range(self.n_domains)) - self.source_domains

    @property
    def x_dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def out_dim(self) -> int:
        """Number of classes, or regression output width."""
        if self.task == TaskKind.CLASSIFICATION:
            return int(self.metadata.get("n_classes", int(self.y.max()) + 1))
        return int(self.y.shape[1]) if self.y.ndim == 2 else 1

    @property
    def is_source(self) -> np.ndarray:
        return np.isin(self.u, sorted(self.source_domains))

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def samples(self) -> Iterator[Sample]:
        """Iterate as Sample triples; target samples carry no label."""
        is_source = self.is_source
        for i in range(len(self)):
            y = self.y[i] if is_source[i] else None
            if y is not None and self.task == TaskKind.CLASSIFICATION:
                y = int(y)
            yield Sample(x=self.x[i], u=int(self.u[i]), y=y)

    def source_view(self) -> "LabeledArrays":
        """Labeled rows from source domains only."""
        mask = self.is_source
        return LabeledArrays(self.x[mask], self.y[mask], self.u[mask])

    def domain_counts(self) -> np.ndarray:
        return np.bincount(self.u, minlength=self.n_domains)


@dataclass(frozen=True, eq=False)
class LabeledArrays:
    """Row-aligned x, y, u arrays."""
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return int(self.x.shape[0])


class BaseTaskBuilder(ABC):
    """Abstract base class for dataset builders."""

    def __init__(self, task_name: str, task: TaskKind):
        """
        Initialize builder.

        Args:
            task_name: Identifier written into dataset metadata
            task: Classification or regression
        """
        self.task_name = task_name
        self.task = task
        self.logger = logging.getLogger(f"tasks.{task_name}")

    @abstractmethod
    def build(self) -> Dataset:
        """
        Build the dataset.

        Returns:
            Dataset with graph, samples and source/target split
        """
        pass

    def describe(self, dataset: Dataset) -> str:
        """One-line summary used by the CLI."""
        labeled = int(dataset.is_source.sum())
        return (
            f"{self.task_name}: {dataset.n_domains} domains, {len(dataset)} samples, "
            f"{labeled} labeled, sources={sorted(dataset.source_domains)}"
        )


def split_seeds(seed: int, count: int) -> List[int]:
    """Derive ``count`` independent child seeds from one seed (fixed spawn order)."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


SEED_STREAMS = ("data", "embeddings", "model", "batches", "evaluation", "layout")


def stream_seed(seed: int, stream: str) -> int:
    """Child seed of a named stream; the order of SEED_STREAMS is fixed."""
    try:
        index = SEED_STREAMS.index(stream)
    except ValueError:
        raise InputError(f"unknown seed stream '{stream}', expected one of {SEED_STREAMS}") from None
    return split_seeds(seed, len(SEED_STREAMS))[index]
