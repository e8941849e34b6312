"""
Fully connected building blocks on top of the tape.
"""
from typing import Dict, List, Sequence

import numpy as np

from engine.errors import DimensionError, InputError
from engine.tensor import Tensor, relu


class Module:
    """Anything owning named parameter tensors."""

    def named_parameters(self) -> List[tuple]:
        raise NotImplementedError

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise InputError(
                f"state dict mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
            )
        for name, p in params.items():
            p.assign(state[name])

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError


class Linear(Module):
    """y = x W + b with He-uniform initialisation."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        if in_features < 1 or out_features < 1:
            raise InputError("Linear layer sizes must be positive")
        bound = np.sqrt(6.0 / in_features)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(rng.uniform(-bound, bound, size=(in_features, out_features)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def named_parameters(self) -> List[tuple]:
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError(f"Linear expects (batch, {self.in_features}), got {x.shape}")
        return x @ self.weight + self.bias


class MLP(Module):
    """
    Stack of Linear layers with ReLU between them.

    Args:
        sizes: Layer widths including input and output, e.g. [2, 64, 64, 1]
        rng: Generator used for initialisation
        final_activation: Apply ReLU after the last layer too
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator, final_activation: bool = False):
        if len(sizes) < 2:
            raise InputError("MLP needs at least an input and an output size")
        self.sizes = list(sizes)
        self.final_activation = final_activation
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes, sizes[1:])]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def named_parameters(self) -> List[tuple]:
        named = []
        for i, layer in enumerate(self.layers):
            named.extend((f"{i}.{name}", p) for name, p in layer.named_parameters())
        return named

    def forward(self, x: Tensor) -> Tensor:
        h = x
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < last or self.final_activation:
                h = relu(h)
        return h
