"""
train and eval subcommands.
"""
import argparse
from pathlib import Path

from cli.commands.common import (
    EXIT_OK,
    add_config_args,
    cli_config,
    load_dataset,
    load_or_pretrain_embeddings,
    output_dir,
    resolve_train_config,
)
from config.settings import Settings
from engine.errors import InputError
from services.evaluation import LEVEL_KEYS, per_domain_metrics
from services.grda_model import build_model, model_from_checkpoint
from services.grda_trainer import make_trainer
from services.report_builder import history_label
from storage.models import Method
from storage.repositories.checkpoint_repository import CheckpointRepository
from storage.repositories.result_repository import ResultRepository


def register(subparsers) -> None:
    train = subparsers.add_parser("train", help="Train grda, dann or source-only on a dataset")
    train.add_argument("--data", type=Path, required=True, help="Dataset directory")
    train.add_argument("--method", default="grda", help="grda | dann | source-only")
    train.add_argument("--lambda-d", dest="lambda_d", type=float)
    train.add_argument("--lr", type=float)
    train.add_argument("--disc-lr", dest="disc_lr", type=float)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--iterations-per-epoch", dest="iterations_per_epoch", type=int)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--output", type=Path, help="Run directory (default <out>/runs)")
    add_config_args(train)
    train.set_defaults(handler=cmd_train)

    evaluate = subparsers.add_parser("eval", help="Per-domain metrics of a checkpoint")
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--data", type=Path, required=True, help="Dataset directory")
    evaluate.add_argument("--draws", type=int, help="Fresh draws per domain for generated tasks")
    evaluate.add_argument("--output", type=Path, help="Result directory (default <out>/eval)")
    evaluate.set_defaults(handler=cmd_eval)


def _parse_method(value: str) -> Method:
    try:
        return Method.parse(value)
    except ValueError:
        raise InputError(f"--method must be one of grda, dann, source-only; got '{value}'") from None


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    method = _parse_method(args.method)
    flags = {
        "lambda_d": args.lambda_d,
        "lr": args.lr,
        "disc_lr": args.disc_lr,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "iterations_per_epoch": args.iterations_per_epoch,
        "seed": args.seed,
    }
    config = resolve_train_config(cli_config(args), flags, settings)
    dataset = load_dataset(args.data)
    embeddings = load_or_pretrain_embeddings(args.data, dataset, settings)

    model = build_model(method, dataset, embeddings, config)
    result = make_trainer(model, dataset, model.config).train()

    out = output_dir(args, "runs", args.output)
    label = history_label(method.value, model.config.seed)
    header, arrays = model.to_checkpoint(dataset.metadata)
    checkpoint = CheckpointRepository(out).save(label, header, arrays)
    ResultRepository(out).write_history(result.history, f"history_{label}.csv")

    last = result.history[-1]
    print(
        f"{method.value} seed {model.config.seed}: {len(result.history)} epochs, "
        f"L_f={last.l_f:.4f} L_d={last.l_d:.4f} ceiling={last.ceiling:.4f} -> {checkpoint}"
    )
    return EXIT_OK


def _fmt(value, metric_name: str) -> str:
    if value is None:
        return "n/a"
    return f"{value:.1f}" if metric_name == "accuracy" else f"{value:.4f}"


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    header, arrays = CheckpointRepository.load_file(args.checkpoint)
    model = model_from_checkpoint(header, arrays)
    dataset = load_dataset(args.data)
    if dataset.n_domains != model.n_domains:
        raise InputError(f"checkpoint has {model.n_domains} domains, dataset {args.data} has {dataset.n_domains}")

    draws = args.draws if args.draws is not None else settings.eval_draws_per_domain
    table = per_domain_metrics(
        model,
        dataset,
        header.method.value,
        header.config.seed,
        config_digest=header.config.digest(),
        draws_per_domain=draws,
    )

    out = output_dir(args, "eval", args.output)
    label = history_label(table.method, table.seed)
    results = ResultRepository(out)
    results.write_metrics([table], f"metrics_{label}.csv")
    results.write_tables([table], f"table_{label}.json")

    shown = {key: _fmt(table.aggregates.get(key), table.metric_name) for key in LEVEL_KEYS + ("target", "overall")}
    levels = " ".join(f"{key}={shown[key]}" for key in LEVEL_KEYS)
    print(
        f"{table.method} seed {table.seed}: target {table.metric_name} {shown['target']} "
        f"({levels}) overall {shown['overall']}"
    )
    return EXIT_OK
