"""
report and run-experiment subcommands.
"""
import argparse
import json
from pathlib import Path
from typing import Dict, List

from pydantic import ValidationError

from cli.commands.common import EXIT_DIVERGENCE, EXIT_INPUT, EXIT_OK, load_dataset, output_dir
from config.settings import Settings
from engine.errors import InputError, ParseError
from services.evaluation import summarize
from services.experiment_orchestrator import ExperimentOrchestrator
from services.report_builder import ReportBuilder
from storage.models import HistoryRow, MetricTable, RunManifest
from storage.repositories.result_repository import ResultRepository, read_tables_file

HISTORY_PREFIX = "history_"


def register(subparsers) -> None:
    report = subparsers.add_parser("report", help="Summary CSV, JSON detail and SVG figures")
    report.add_argument(
        "--tables",
        type=Path,
        nargs="+",
        required=True,
        help="Metric table JSON files, or directories holding table*.json / tables.json",
    )
    report.add_argument("--data", type=Path, help="Dataset directory; enables the domain maps")
    report.add_argument("--history", type=Path, nargs="*", default=[], help="history_<run>.csv files")
    report.add_argument("--output", type=Path, help="Report directory (default <out>/report)")
    report.set_defaults(handler=cmd_report)

    experiment = subparsers.add_parser("run-experiment", help="Every (method, seed) of a manifest")
    experiment.add_argument("--manifest", type=Path, required=True, help="RunManifest JSON")
    experiment.add_argument("--workers", type=int, help="Worker processes (default: settings max_workers)")
    experiment.add_argument("--output", type=Path, help="Overrides the manifest's out_dir")
    experiment.set_defaults(handler=cmd_run_experiment)


def _table_files(paths: List[Path]) -> List[Path]:
    files: List[Path] = []
    for path in paths:
        if path.is_dir():
            found = sorted(path.glob("table*.json"))
            if not found:
                raise InputError(f"no table*.json files in {path}")
            files.extend(found)
        elif path.exists():
            files.append(path)
        else:
            raise InputError(f"metric tables not found: {path}")
    return files


def load_tables(paths: List[Path]) -> List[MetricTable]:
    tables: List[MetricTable] = []
    for path in _table_files(paths):
        tables.extend(read_tables_file(path))
    if not tables:
        raise InputError("no metric tables to report")
    return tables


def load_histories(paths: List[Path]) -> Dict[str, List[HistoryRow]]:
    histories: Dict[str, List[HistoryRow]] = {}
    for path in paths:
        label = path.stem[len(HISTORY_PREFIX):] if path.stem.startswith(HISTORY_PREFIX) else path.stem
        histories[label] = ResultRepository(path.parent).read_history(path.name)
    return histories


def cmd_report(args: argparse.Namespace, settings: Settings) -> int:
    tables = load_tables(args.tables)
    histories = load_histories(args.history)
    graph, sources, layout_seed = None, (), 0
    if args.data is not None:
        dataset = load_dataset(args.data)
        graph, sources = dataset.graph, sorted(dataset.source_domains)
        layout_seed = int(dataset.metadata.get("seed", 0))

    out = output_dir(args, "report", args.output)
    files = ReportBuilder(out).emit_report(tables, histories, graph, sources, layout_seed)
    for row in summarize(tables):
        target = row.get("target_mean")
        std = row.get("target_std")
        shown = "n/a" if target is None else f"{target:.4f} +/- {std:.4f}"
        print(f"{row['method']}: target {row['metric_name']} {shown} over seeds {row['seeds']}")
    print(f"{len(files)} report files -> {out}")
    return EXIT_OK


def read_manifest(path: Path) -> RunManifest:
    if not path.exists():
        raise InputError(f"manifest not found: {path}")
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        # malformed JSON surfaces as a json_invalid validation error
        if any(err["type"] == "json_invalid" for err in e.errors()):
            raise ParseError(f"{path} is not valid JSON") from None
        raise


def cmd_run_experiment(args: argparse.Namespace, settings: Settings) -> int:
    manifest = read_manifest(args.manifest)
    if args.output is not None:
        manifest = manifest.model_copy(update={"out_dir": args.output})
    if args.workers is not None and args.workers < 1:
        raise InputError(f"--workers must be >= 1, got {args.workers}")

    stats = ExperimentOrchestrator(manifest, args.workers).run_experiment()
    print(
        f"run {stats['run_id']}: {stats['runs_completed']}/{stats['runs_total']} runs completed "
        f"-> {manifest.out_dir}"
    )
    for error in stats["errors"]:
        print(f"  failed: {json.dumps(error)}")
    if not stats["errors"]:
        return EXIT_OK
    if all("TrainingDivergenceError" in e["error"] for e in stats["errors"]):
        return EXIT_DIVERGENCE
    return EXIT_INPUT
