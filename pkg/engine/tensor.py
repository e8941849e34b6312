"""
Dense float64 tensors with a recorded tape and reverse-mode differentiation.

Every primitive builds an output Tensor that remembers its parents and a
local gradient rule. ``backward`` orders the recorded nodes topologically
(the Tape) and pushes gradients from the scalar root to every leaf that
requires them. Leaf gradients accumulate across calls until ``zero_grad``.
"""
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from engine.errors import DimensionError, InputError

ArrayLike = Union[np.ndarray, Sequence, float, int]
GradRule = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _as_array(value: ArrayLike) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    array.flags.writeable = False
    return array


class Tensor:
    """A float64 array plus the bookkeeping needed for reverse-mode AD."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_rule", "op")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _parents: Tuple["Tensor", ...] = (),
        _rule: Optional[GradRule] = None,
        op: str = "leaf",
    ):
        self.data = _as_array(data)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents
        self._rule = _rule
        self.op = op

    # ------------------------------------------------------------------
    # basic properties
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.size != 1:
            raise InputError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same values, cut from the tape."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def assign(self, values: ArrayLike) -> None:
        """Replace a leaf's values in place of the old array (optimizer updates)."""
        new = _as_array(values)
        if new.shape != self.shape:
            raise DimensionError(f"cannot assign shape {new.shape} to tensor of shape {self.shape}")
        self.data = new

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # node construction
    # ------------------------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: Tuple["Tensor", ...], rule: GradRule, op: str) -> "Tensor":
        needs_grad = any(p.requires_grad for p in parents)
        if not needs_grad:
            return Tensor(data, requires_grad=False, op=op)
        return Tensor(data, requires_grad=True, _parents=parents, _rule=rule, op=op)

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other: Union["Tensor", float]) -> "Tensor":
        if not isinstance(other, Tensor):
            scalar = float(other)
            return Tensor._make(self.data + scalar, (self,), lambda g: (g,), "add_scalar")
        if self.shape == other.shape:
            return Tensor._make(self.data + other.data, (self, other), lambda g: (g, g), "add")
        # bias-add: (m, n) + (n,)
        if self.data.ndim == 2 and other.data.ndim == 1 and other.shape[0] == self.shape[1]:
            return Tensor._make(
                self.data + other.data,
                (self, other),
                lambda g: (g, g.sum(axis=0)),
                "bias_add",
            )
        raise DimensionError(f"cannot add shapes {self.shape} and {other.shape}")

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other: Union["Tensor", float]) -> "Tensor":
        if isinstance(other, Tensor):
            return self + (-other)
        return self + (-float(other))

    def __rsub__(self, other: float) -> "Tensor":
        return (-self) + float(other)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        if not isinstance(other, Tensor):
            scalar = float(other)
            return Tensor._make(self.data * scalar, (self,), lambda g: (g * scalar,), "mul_scalar")
        if self.shape != other.shape:
            raise DimensionError(f"cannot multiply shapes {self.shape} and {other.shape}")
        a, b = self.data, other.data
        return Tensor._make(a * b, (self, other), lambda g: (g * b, g * a), "mul")

    __rmul__ = __mul__

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self) -> "Tensor":
        shape = self.shape
        return Tensor._make(
            np.array(self.data.sum()),
            (self,),
            lambda g: (np.broadcast_to(g, shape).copy(),),
            "sum",
        )

    def mean(self) -> "Tensor":
        n = max(self.size, 1)
        return self.sum() * (1.0 / n)


# ----------------------------------------------------------------------
# primitives
# ----------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a (m x k) and b (k x n)."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    x, y = a.data, b.data
    return Tensor._make(x @ y, (a, b), lambda g: (g @ y.T, x.T @ g), "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose needs a 2-D tensor, got {a.shape}")
    return Tensor._make(a.data.T, (a,), lambda g: (g.T,), "transpose")


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at exactly 0 is 0."""
    mask = x.data > 0
    return Tensor._make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def sigmoid(x: Tensor) -> Tensor:
    """Elementwise logistic function, stable for large |x|."""
    s = expit(x.data)
    return Tensor._make(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 2-D tensors along columns."""
    if not parts:
        raise InputError("concat needs at least one tensor")
    rows = parts[0].shape[0]
    for p in parts:
        if p.data.ndim != 2 or p.shape[0] != rows:
            raise DimensionError(f"concat needs 2-D tensors with {rows} rows, got {p.shape}")
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def rule(g: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return Tensor._make(np.hstack([p.data for p in parts]), tuple(parts), rule, "concat")


# ----------------------------------------------------------------------
# tape and backward
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TapeEntry:
    """One recorded primitive: its output node and input nodes."""
    output: Tensor
    inputs: Tuple[Tensor, ...]

    @property
    def op(self) -> str:
        return self.output.op


class Tape:
    """Topologically ordered record of the primitives reachable from a root."""

    def __init__(self, root: Tensor):
        self.root = root
        self.entries: List[TapeEntry] = []
        visited = set()
        # iterative post-order DFS; deep MLP stacks would overflow recursion
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                self.entries.append(TapeEntry(node, node._parents))
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TapeEntry]:
        return iter(self.entries)

    def __reversed__(self) -> Iterator[TapeEntry]:
        return reversed(self.entries)


def backward(loss: Tensor) -> Tape:
    """
    Accumulate d(loss)/d(leaf) into ``grad`` of every leaf requiring gradients.

    Args:
        loss: Single-element tensor connected to the tape

    Returns:
        The tape that was traversed
    """
    if loss.size != 1:
        raise InputError(f"backward needs a scalar root, got shape {loss.shape}")
    if not loss.requires_grad:
        raise InputError("backward root is not connected to any tensor requiring gradients")

    tape = Tape(loss)
    pending = {id(loss): np.ones_like(loss.data)}
    for entry in reversed(tape):
        node = entry.output
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, parent_grad in zip(entry.inputs, node._rule(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = parent_grad if key not in pending else pending[key] + parent_grad
    return tape
