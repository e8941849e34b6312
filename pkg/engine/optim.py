"""
SGD and Adam over lists of leaf tensors.
"""
from abc import ABC, abstractmethod
from typing import List, Sequence

import numpy as np

from engine.errors import DimensionError, InputError
from engine.tensor import Tensor


class Optimizer(ABC):
    """Base optimizer; ``step`` reads each parameter's accumulated ``grad``."""

    kind: str = ""

    def __init__(self, params: Sequence[Tensor], learning_rate: float):
        if learning_rate <= 0:
            raise InputError(f"learning_rate must be > 0, got {learning_rate}")
        self.params: List[Tensor] = list(params)
        self.learning_rate = float(learning_rate)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def _gradient(self, p: Tensor) -> np.ndarray:
        if p.grad is None:
            return np.zeros_like(p.data)
        if p.grad.shape != p.shape:
            raise DimensionError(f"gradient shape {p.grad.shape} does not match parameter {p.shape}")
        return p.grad

    @abstractmethod
    def step(self) -> None:
        """Apply one update to every parameter."""

    def state_dict(self) -> dict:
        return {"kind": self.kind, "learning_rate": self.learning_rate}


class SGD(Optimizer):
    """p <- p - lr * g"""

    kind = "sgd"

    def step(self) -> None:
        for p in self.params:
            g = self._gradient(p)
            p.assign(p.data - self.learning_rate * g)


class Adam(Optimizer):
    """Bias-corrected Adam."""

    kind = "adam"

    def __init__(
        self,
        params: Sequence[Tensor],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        super().__init__(params, learning_rate)
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise InputError("Adam betas must lie in [0, 1)")
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = self._gradient(p)
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p.assign(p.data - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon))


def make_optimizer(kind: str, params: Sequence[Tensor], learning_rate: float) -> Optimizer:
    """Build an optimizer by name ('adam' or 'sgd')."""
    kinds = {"adam": Adam, "sgd": SGD}
    try:
        cls = kinds[kind.lower()]
    except KeyError:
        raise InputError(f"unknown optimizer '{kind}', expected one of {sorted(kinds)}") from None
    return cls(params, learning_rate)
