"""
Exception hierarchy shared by every layer of the toolkit.
"""
from typing import Optional


class GrdaError(Exception):
    """Base class for all toolkit errors."""


class InputError(GrdaError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionError(GrdaError, ValueError):
    """Tensor or array shapes do not line up."""


class ParseError(InputError):
    """A data file is malformed; carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class TrainingDivergenceError(GrdaError):
    """A loss became non-finite or exceeded the divergence threshold."""

    def __init__(self, loss_name: str, value: float, epoch: Optional[int] = None):
        self.loss_name = loss_name
        self.value = value
        self.epoch = epoch
        where = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(f"training diverged{where}: {loss_name}={value}")


class GraphConnectivityError(GrdaError):
    """A sampled domain graph stayed disconnected after every retry."""


class UndefinedPosteriorError(GrdaError):
    """The domain posterior p(u|e) was requested at a bin with zero marginal mass."""


class VerdictFailure(GrdaError):
    """At least one equilibrium check failed at its tolerance."""
