"""
Orchestrator for running a grid of (method, seed) experiments over one dataset.
"""
import csv
import logging
import uuid
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from config.logging_config import get_logger
from config.settings import get_settings
from config.tpt_splits import get_split
from engine.errors import GrdaError
from graphs.embeddings import NodeEmbeddingTable, embedding_auc, pretrain_embeddings
from services.evaluation import per_domain_metrics
from services.grda_model import build_model
from services.grda_trainer import make_trainer
from services.report_builder import ReportBuilder, history_label, parse_history_label
from storage.models import DatasetSpec, HistoryRow, Method, MetricTable, RunManifest
from storage.repositories.checkpoint_repository import CheckpointRepository
from storage.repositories.dataset_repository import DatasetRepository
from storage.repositories.result_repository import ResultRepository, format_value
from tasks.base_task import Dataset, stream_seed
from tasks.dg_task import Chain3TaskBuilder, DgTaskBuilder
from tasks.tpt_task import TptTaskBuilder

logger = logging.getLogger(__name__)

GAP_TRACE_HEADER = ["method", "seed", "epoch", "L_d", "ceiling", "gap"]


def build_dataset(spec: DatasetSpec, max_retries: int = 100) -> Dataset:
    """Generate or load the dataset a manifest describes."""
    if spec.kind == "dg":
        return DgTaskBuilder(spec.n_domains, spec.per_domain, spec.n_sources, spec.seed, max_retries).build()
    if spec.kind == "chain3":
        return Chain3TaskBuilder(spec.per_domain, spec.seed).build()
    if spec.kind == "tpt":
        return TptTaskBuilder(spec.csv, get_split(spec.split)).build()
    return DatasetRepository(spec.path).load()


@dataclass
class RunJob:
    """Everything one worker needs; picklable for process pools."""
    method: Method
    seed: int
    manifest: RunManifest
    dataset: Dataset
    embeddings: NodeEmbeddingTable


@dataclass
class RunOutcome:
    method: Method
    seed: int
    table: Optional[MetricTable] = None
    history: List[HistoryRow] = field(default_factory=list)
    checkpoint: Optional[Tuple] = None
    error: Optional[str] = None

    @property
    def label(self) -> str:
        return history_label(self.method.value, self.seed)


def execute_run(job: RunJob) -> RunOutcome:
    """Train and evaluate one (method, seed); failures are returned, not raised."""
    outcome = RunOutcome(job.method, job.seed)
    try:
        config = job.manifest.config.model_copy(update={"seed": job.seed, "task": job.dataset.task})
        model = build_model(job.method, job.dataset, job.embeddings, config)
        result = make_trainer(model, job.dataset, model.config).train()
        outcome.history = result.history
        outcome.table = per_domain_metrics(
            model,
            job.dataset,
            job.method.value,
            job.seed,
            config_digest=model.config.digest(),
            draws_per_domain=job.manifest.eval_draws_per_domain,
        )
        outcome.checkpoint = model.to_checkpoint(job.dataset.metadata)
    except GrdaError as e:
        outcome.error = f"{type(e).__name__}: {e}"
    except Exception as e:
        logger.exception(f"Unexpected failure in {job.method.value} seed {job.seed}")
        outcome.error = f"{type(e).__name__}: {e}"
    return outcome


class ExperimentOrchestrator:
    """Runs every (method, seed) of a manifest and writes metrics, histories and the report."""

    def __init__(self, manifest: RunManifest, max_workers: Optional[int] = None):
        """
        Initialize orchestrator.

        Args:
            manifest: Dataset, methods, training config and seeds
            max_workers: Worker processes; defaults to the max_workers setting
        """
        self.manifest = manifest
        self.settings = get_settings()
        self.max_workers = max_workers or self.settings.max_workers
        self.out_dir = Path(manifest.out_dir)
        self.results = ResultRepository(self.out_dir)
        self.checkpoints = CheckpointRepository(self.out_dir / "checkpoints")
        self.datasets = DatasetRepository(self.out_dir / "dataset")
        self.tables: List[MetricTable] = []
        self.histories: Dict[str, List[HistoryRow]] = {}

    def prepare(self) -> Tuple[Dataset, NodeEmbeddingTable]:
        """Build the dataset and pretrain its embeddings once for all runs."""
        dataset = build_dataset(self.manifest.dataset, self.settings.graph_max_retries)
        self.datasets.save(dataset)

        source = self.manifest.dataset
        if source.kind == "path" and DatasetRepository(source.path).embeddings_path.exists():
            embeddings = DatasetRepository(source.path).load_embeddings()
        else:
            embeddings = pretrain_embeddings(
                dataset.graph,
                k=self.manifest.embedding_dim,
                lr=self.manifest.pretrain_lr,
                steps=self.manifest.pretrain_steps,
                seed=stream_seed(source.seed, "embeddings"),
            )
        self.datasets.save_embeddings(embeddings)
        n_edges = len(dataset.graph.edges())
        # AUC needs both edges and non-edges
        if 0 < n_edges < dataset.n_domains * (dataset.n_domains - 1) // 2:
            logger.info(f"Embedding ROC-AUC: {embedding_auc(dataset.graph, embeddings):.4f}")
        return dataset, embeddings

    def _jobs(self, dataset: Dataset, embeddings: NodeEmbeddingTable) -> List[RunJob]:
        return [
            RunJob(method, seed, self.manifest, dataset, embeddings)
            for method in self.manifest.methods
            for seed in self.manifest.seeds
        ]

    def _execute(self, jobs: List[RunJob]) -> List[RunOutcome]:
        if self.max_workers <= 1 or len(jobs) <= 1:
            return [execute_run(job) for job in jobs]

        outcomes: Dict[Tuple[Method, int], RunOutcome] = {}
        with ProcessPoolExecutor(max_workers=min(self.max_workers, len(jobs))) as executor:
            future_to_job = {executor.submit(execute_run, job): job for job in jobs}
            for future in as_completed(future_to_job):
                job = future_to_job[future]
                try:
                    outcomes[(job.method, job.seed)] = future.result()
                except Exception as e:
                    outcomes[(job.method, job.seed)] = RunOutcome(job.method, job.seed, error=f"{type(e).__name__}: {e}")
        # manifest order regardless of completion order
        return [outcomes[(job.method, job.seed)] for job in jobs]

    def _store(self, outcome: RunOutcome) -> None:
        self.results.write_history(outcome.history, f"history_{outcome.label}.csv")
        self.histories[outcome.label] = outcome.history
        header, arrays = outcome.checkpoint
        self.checkpoints.save(outcome.label, header, arrays)
        self.tables.append(outcome.table)

    def write_gap_trace(self, name: str = "gap_trace.csv") -> Path:
        """|L_d - ceiling| per epoch for every completed run."""
        path = self.results.path_for(name)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(GAP_TRACE_HEADER)
            for label, history in self.histories.items():
                method, seed = parse_history_label(label)
                for row in history:
                    writer.writerow([
                        method, seed, row.epoch,
                        format_value(row.l_d), format_value(row.ceiling), format_value(row.gap),
                    ])
        return path

    def run_experiment(self) -> dict:
        """
        Run every (method, seed) of the manifest.

        Returns:
            Dict with run statistics; failed runs are listed under ``errors``
        """
        run_id = str(uuid.uuid4())
        started_at = datetime.now()
        log = get_logger(__name__).bind(run_id=run_id)
        log.info(
            "experiment started",
            dataset=self.manifest.dataset.kind,
            methods=[m.value for m in self.manifest.methods],
            seeds=self.manifest.seeds,
            workers=self.max_workers,
        )

        stats = {
            "run_id": run_id,
            "started_at": started_at.isoformat(),
            "runs_total": len(self.manifest.methods) * len(self.manifest.seeds),
            "runs_completed": 0,
            "runs_failed": 0,
            "errors": [],
            "files": [],
        }
        self.tables = []
        self.histories = {}

        try:
            dataset, embeddings = self.prepare()
            for outcome in self._execute(self._jobs(dataset, embeddings)):
                if outcome.error is not None:
                    log.error("run failed", method=outcome.method.value, seed=outcome.seed, error=outcome.error)
                    stats["runs_failed"] += 1
                    stats["errors"].append({
                        "method": outcome.method.value,
                        "seed": outcome.seed,
                        "error": outcome.error,
                    })
                    continue
                self._store(outcome)
                stats["runs_completed"] += 1

            if self.tables:
                stats["files"].append(str(self.results.write_metrics(self.tables)))
                stats["files"].append(str(self.results.write_tables(self.tables)))
                stats["files"].append(str(self.write_gap_trace()))
                report = ReportBuilder(self.out_dir).emit_report(
                    self.tables,
                    self.histories,
                    graph=dataset.graph,
                    sources=sorted(dataset.source_domains),
                    layout_seed=self.manifest.dataset.seed,
                )
                stats["files"].extend(str(p) for p in report.values())

        except Exception as e:
            logger.error(f"Error in experiment run: {e}")
            stats["errors"].append({"method": None, "seed": None, "error": f"{type(e).__name__}: {e}"})

        stats["completed_at"] = datetime.now().isoformat()
        stats["duration_seconds"] = (datetime.now() - started_at).total_seconds()
        self.results.write_json({k: v for k, v in stats.items() if k != "files"}, "run_stats.json")

        log.info(
            "experiment completed",
            completed=stats["runs_completed"],
            failed=stats["runs_failed"],
            duration_seconds=round(stats["duration_seconds"], 2),
        )
        return stats


def run_experiment(manifest: RunManifest, max_workers: Optional[int] = None) -> dict:
    return ExperimentOrchestrator(manifest, max_workers).run_experiment()
