"""Dense float64 tensors with reverse-mode automatic differentiation."""
from engine.errors import (
    DimensionError,
    GraphConnectivityError,
    GrdaError,
    InputError,
    ParseError,
    TrainingDivergenceError,
    UndefinedPosteriorError,
    VerdictFailure,
)
from engine.tensor import Tape, Tensor, backward

__all__ = [
    "DimensionError",
    "GraphConnectivityError",
    "GrdaError",
    "InputError",
    "ParseError",
    "Tape",
    "Tensor",
    "TrainingDivergenceError",
    "UndefinedPosteriorError",
    "VerdictFailure",
    "backward",
]
