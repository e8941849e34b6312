"""
Helpers shared by the subcommands: config resolution, dataset and embedding loading.
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from config.settings import Settings
from engine.errors import InputError, ParseError
from graphs.embeddings import NodeEmbeddingTable, pretrain_embeddings
from storage.models import CliConfig, TrainConfig
from storage.repositories.dataset_repository import DatasetRepository
from tasks.base_task import Dataset, stream_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIVERGENCE = 3
EXIT_VERDICT = 4


def add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file with flat TrainConfig keys")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config key after the file and flags (repeatable)",
    )


def cli_config(args: argparse.Namespace) -> CliConfig:
    return CliConfig(
        subcommand=args.command,
        config_path=getattr(args, "config", None),
        overrides=getattr(args, "overrides", []) or [],
        verbosity=args.verbose,
        out_dir=args.out,
    )


def read_config_file(path: Path) -> Dict[str, Any]:
    """Flat JSON object of TrainConfig keys."""
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {e.msg}", line=e.lineno) from None
    if not isinstance(document, dict):
        raise InputError(f"{path} must hold a JSON object of config keys")
    return document


def _check_keys(keys, origin: str) -> None:
    known = set(TrainConfig.model_fields)
    for key in keys:
        if key not in known:
            raise InputError(f"unknown config key '{key}' in {origin}")


def resolve_train_config(cli: CliConfig, flags: Dict[str, Any], settings: Settings) -> TrainConfig:
    """
    Settings defaults, then the config file, then explicit flags, then ``--set`` overrides.

    Unknown keys are rejected naming the key.
    """
    values: Dict[str, Any] = {
        "lambda_d": settings.default_lambda_d,
        "lr": settings.default_lr,
        "disc_lr": settings.default_disc_lr,
        "batch_size": settings.default_batch_size,
        "epochs": settings.default_epochs,
        "hidden_width": settings.hidden_width,
        "divergence_threshold": settings.divergence_threshold,
    }
    if cli.config_path is not None:
        file_values = read_config_file(cli.config_path)
        _check_keys(file_values, str(cli.config_path))
        values.update(file_values)
    values.update({k: v for k, v in flags.items() if v is not None})
    _check_keys(cli.overrides, "--set")
    values.update(cli.overrides)
    return TrainConfig(**values)


def load_dataset(path: Path) -> Dataset:
    repo = DatasetRepository(path)
    if not repo.exists():
        raise InputError(f"no dataset in {path} (expected dataset.csv, graph.json, metadata.json)")
    return repo.load()


def dataset_seed(dataset: Dataset) -> int:
    return int(dataset.metadata.get("seed", 0))


def load_or_pretrain_embeddings(path: Path, dataset: Dataset, settings: Settings) -> NodeEmbeddingTable:
    """Embeddings stored next to the dataset, else pretrained with the settings defaults and stored."""
    repo = DatasetRepository(path)
    if repo.embeddings_path.exists():
        table = repo.load_embeddings()
        if table.n_domains != dataset.n_domains:
            raise InputError(f"{repo.embeddings_path} has {table.n_domains} rows for {dataset.n_domains} domains")
        return table
    logger.info(f"No embeddings in {path}; pretraining with k={settings.embedding_dim}")
    table = pretrain_embeddings(
        dataset.graph,
        k=settings.embedding_dim,
        lr=settings.pretrain_lr,
        steps=settings.pretrain_steps,
        seed=stream_seed(dataset_seed(dataset), "embeddings"),
    )
    repo.save_embeddings(table)
    return table


def output_dir(args: argparse.Namespace, name: str, explicit: Optional[Path] = None) -> Path:
    """``explicit`` when given, else ``<out>/<name>``."""
    path = Path(explicit) if explicit is not None else Path(args.out) / name
    path.mkdir(parents=True, exist_ok=True)
    return path
