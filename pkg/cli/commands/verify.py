"""
verify-theory subcommand.
"""
import argparse
from pathlib import Path
from typing import List

from cli.commands.common import EXIT_OK, load_dataset, output_dir
from config.settings import Settings
from engine.errors import InputError, VerdictFailure
from services.density import load_density_document, write_density_document
from services.grda_model import model_from_checkpoint
from services.theory_verifier import all_pass, encoder_density, response_self_test, verify_density
from storage.models import EquilibriumReport
from storage.repositories.checkpoint_repository import CheckpointRepository
from storage.repositories.result_repository import ResultRepository


def register(subparsers) -> None:
    verify = subparsers.add_parser(
        "verify-theory",
        help="Check equilibrium conditions on an analytic density or a trained encoder",
    )
    mode = verify.add_mutually_exclusive_group(required=True)
    mode.add_argument("--analytic", type=Path, help="Density JSON {graph, masses, weights?}")
    mode.add_argument("--checkpoint", type=Path, help="Trained model checkpoint (needs --data)")
    mode.add_argument("--self-test", action="store_true", help="Reproduce the 0.38 optimal-response example")
    verify.add_argument("--data", type=Path, help="Dataset directory for --checkpoint")
    verify.add_argument("--bins", type=int, help="Histogram bins per axis (default: settings grid_bins)")
    verify.add_argument("--tol", type=float, help="Verdict tolerance (default depends on the mode)")
    verify.add_argument(
        "--allow-reweight",
        action="store_true",
        help="Use empirical p(u) when domain sample counts are unbalanced",
    )
    verify.add_argument("--output", type=Path, help="Report directory (default <out>/theory)")
    verify.set_defaults(handler=cmd_verify_theory)


def _reports(args: argparse.Namespace, settings: Settings, out: Path) -> List[EquilibriumReport]:
    if args.self_test:
        return [response_self_test(args.tol if args.tol is not None else 1e-12)]

    if args.analytic is not None:
        density, graph = load_density_document(args.analytic)
        return verify_density(density, graph, args.tol if args.tol is not None else settings.analytic_tolerance)

    if args.data is None:
        raise InputError("--checkpoint needs --data")
    header, arrays = CheckpointRepository.load_file(args.checkpoint)
    model = model_from_checkpoint(header, arrays)
    dataset = load_dataset(args.data)
    density = encoder_density(
        model,
        dataset.x,
        dataset.u,
        bins=args.bins if args.bins is not None else settings.grid_bins,
        balance_tolerance=settings.domain_balance_tolerance,
        allow_reweight=args.allow_reweight,
    )
    write_density_document(density, model.graph, out / "encoder_density.json")
    return verify_density(density, model.graph, args.tol if args.tol is not None else settings.trained_tolerance)


def cmd_verify_theory(args: argparse.Namespace, settings: Settings) -> int:
    if args.tol is not None and args.tol < 0:
        raise InputError(f"--tol must be >= 0, got {args.tol}")
    if args.bins is not None and args.bins < 1:
        raise InputError(f"--bins must be >= 1, got {args.bins}")

    out = output_dir(args, "theory", args.output)
    reports = _reports(args, settings, out)
    results = ResultRepository(out)
    for report in reports:
        results.write_report(report)
        print(
            f"{report.kind}: residual={report.residual:.3e} tol={report.tolerance:g} "
            f"{'pass' if report.verdict else 'FAIL'}"
        )

    if not all_pass(reports):
        failed = ", ".join(r.kind for r in reports if not r.verdict)
        raise VerdictFailure(f"equilibrium checks failed: {failed} (reports in {out})")
    return EXIT_OK
