"""
gen-data and pretrain-embed subcommands.
"""
import argparse
from pathlib import Path

from cli.commands.common import EXIT_OK, dataset_seed, load_dataset, output_dir
from config.settings import Settings
from config.tpt_splits import get_split
from engine.errors import InputError
from graphs.embeddings import embedding_auc, pretrain_embeddings, reconstruction_loss
from storage.repositories.dataset_repository import DatasetRepository
from tasks.base_task import stream_seed
from tasks.dg_task import Chain3TaskBuilder, DgTaskBuilder
from tasks.tpt_task import TptTaskBuilder


def register(subparsers) -> None:
    gen = subparsers.add_parser("gen-data", help="Generate or ingest a dataset")
    kinds = gen.add_subparsers(dest="kind", required=True)

    dg = kinds.add_parser("dg", help="Random unit-vector graph with two Gaussians per domain")
    dg.add_argument("--domains", type=int, default=15)
    dg.add_argument("--per-domain", type=int, default=100)
    dg.add_argument("--sources", type=int, default=6)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--output", type=Path, help="Dataset directory (default <out>/data)")
    dg.set_defaults(handler=cmd_gen_data)

    chain3 = kinds.add_parser("chain3", help="Three domains on a chain, middle domain is the target")
    chain3.add_argument("--per-domain", type=int, default=200)
    chain3.add_argument("--seed", type=int, default=0)
    chain3.add_argument("--output", type=Path, help="Dataset directory (default <out>/data)")
    chain3.set_defaults(handler=cmd_gen_data)

    tpt = kinds.add_parser("tpt", help="Monthly state temperatures as a 48-domain regression task")
    tpt.add_argument("--csv", type=Path, required=True, help="state,year,m1..m12 records")
    tpt.add_argument("--split", required=True, help="Built-in split name (ew, ns) or split JSON path")
    tpt.add_argument("--output", type=Path, help="Dataset directory (default <out>/data)")
    tpt.set_defaults(handler=cmd_gen_data)

    embed = subparsers.add_parser("pretrain-embed", help="Pretrain node embeddings of a dataset's graph")
    embed.add_argument("--data", type=Path, required=True, help="Dataset directory")
    embed.add_argument("--k", type=int, help="Embedding dimension (default: settings embedding_dim)")
    embed.add_argument("--lr", type=float, help="Learning rate (default: settings pretrain_lr)")
    embed.add_argument("--steps", type=int, help="Full-batch steps (default: settings pretrain_steps)")
    embed.add_argument("--seed", type=int, help="Seed (default: the dataset seed)")
    embed.set_defaults(handler=cmd_pretrain_embed)


def _check_flags(args: argparse.Namespace) -> None:
    """Reject bad values naming the flag they came from."""
    per_domain = getattr(args, "per_domain", None)
    if per_domain is not None and (per_domain < 2 or per_domain % 2):
        raise InputError(f"--per-domain must be even and >= 2, got {per_domain}")
    if args.kind == "dg":
        if args.domains < 2:
            raise InputError(f"--domains must be >= 2, got {args.domains}")
        if not 1 <= args.sources < args.domains:
            raise InputError(f"--sources must lie in [1, {args.domains - 1}], got {args.sources}")
    seed = getattr(args, "seed", None)
    if seed is not None and seed < 0:
        raise InputError(f"--seed must be non-negative, got {seed}")


def cmd_gen_data(args: argparse.Namespace, settings: Settings) -> int:
    _check_flags(args)
    if args.kind == "dg":
        builder = DgTaskBuilder(args.domains, args.per_domain, args.sources, args.seed, settings.graph_max_retries)
    elif args.kind == "chain3":
        builder = Chain3TaskBuilder(args.per_domain, args.seed)
    else:
        builder = TptTaskBuilder(args.csv, get_split(args.split))

    dataset = builder.build()
    out = output_dir(args, "data", args.output)
    DatasetRepository(out).save(dataset)
    print(f"{builder.describe(dataset)} -> {out}")
    return EXIT_OK


def cmd_pretrain_embed(args: argparse.Namespace, settings: Settings) -> int:
    dataset = load_dataset(args.data)
    k = args.k if args.k is not None else settings.embedding_dim
    lr = args.lr if args.lr is not None else settings.pretrain_lr
    steps = args.steps if args.steps is not None else settings.pretrain_steps
    if lr <= 0:
        raise InputError(f"--lr must be > 0, got {lr}")
    seed = args.seed if args.seed is not None else dataset_seed(dataset)

    table = pretrain_embeddings(dataset.graph, k=k, lr=lr, steps=steps, seed=stream_seed(seed, "embeddings"))
    path = DatasetRepository(args.data).save_embeddings(table)

    line = f"embeddings {table.n_domains}x{table.k}: L_g={reconstruction_loss(dataset.graph, table.z):.4f}"
    n_edges = len(dataset.graph.edges())
    if 0 < n_edges < dataset.n_domains * (dataset.n_domains - 1) // 2:
        line += f" auc={embedding_auc(dataset.graph, table):.4f}"
    print(f"{line} -> {path}")
    return EXIT_OK
