"""Subcommand handlers; each module registers its parsers through ``register``."""
from cli.commands import data, report, train, verify

COMMAND_MODULES = (data, train, verify, report)

__all__ = ["COMMAND_MODULES"]
