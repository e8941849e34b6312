"""
Loss functions built on the tape. All logarithms are natural logarithms.
"""
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from engine.errors import DimensionError, InputError
from engine.tensor import ArrayLike, Tensor

__all__ = [
    "bce_with_logit",
    "softmax_cross_entropy",
    "l2_loss",
    "softmax_probabilities",
]


def bce_with_logit(
    logit: Tensor,
    target: ArrayLike,
    weight: Optional[ArrayLike] = None,
) -> Tensor:
    """
    Binary cross-entropy on logits, averaged over elements.

    Uses softplus(l) - t*l = -t log s(l) - (1-t) log(1-s(l)), which never
    evaluates log(0).

    Args:
        logit: Logits of any shape
        target: Targets in [0, 1], same shape as ``logit`` (or a scalar)
        weight: Optional non-negative per-element weights; the mean is
            taken as sum(w * loss) / sum(w)
    """
    t = np.broadcast_to(np.asarray(target, dtype=np.float64), logit.shape)
    if np.any(t < 0) or np.any(t > 1):
        raise InputError("bce_with_logit targets must lie in [0, 1]")

    if weight is None:
        w = np.full(logit.shape, 1.0 / max(logit.size, 1))
    else:
        w = np.asarray(weight, dtype=np.float64)
        if w.shape != logit.shape:
            raise DimensionError(f"weight shape {w.shape} does not match logits {logit.shape}")
        total = w.sum()
        if total <= 0:
            raise InputError("bce_with_logit weights must have a positive sum")
        w = w / total

    l = logit.data
    # softplus(l) = -log_expit(-l)
    per_element = -log_expit(-l) - t * l
    value = np.array(float(np.sum(w * per_element)))

    def rule(g: np.ndarray):
        return (g * w * (expit(l) - t),)

    return Tensor._make(value, (logit,), rule, "bce_with_logit")


def _labels_array(labels: Union[int, Sequence[int], np.ndarray], rows: int, classes: int) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(labels))
    if idx.shape != (rows,):
        raise DimensionError(f"expected {rows} labels, got shape {idx.shape}")
    if not np.issubdtype(idx.dtype, np.integer):
        if np.any(idx != np.round(idx)):
            raise InputError("class labels must be integers")
        idx = idx.astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= classes):
        raise InputError(f"class label out of range [0, {classes})")
    return idx


def softmax_cross_entropy(logits: Tensor, labels: Union[int, Sequence[int], np.ndarray]) -> Tensor:
    """
    Mean of -log softmax(logits)[label] over rows.

    Args:
        logits: Tensor of shape (C,) or (B, C)
        labels: One class index per row
    """
    single = logits.data.ndim == 1
    z = logits.data.reshape(1, -1) if single else logits.data
    if z.ndim != 2:
        raise DimensionError(f"logits must be 1-D or 2-D, got {logits.shape}")
    rows, classes = z.shape
    idx = _labels_array(labels, rows, classes)

    log_p = log_softmax(z, axis=1)
    value = np.array(float(-log_p[np.arange(rows), idx].mean()))

    def rule(g: np.ndarray):
        grad = np.exp(log_p)
        grad[np.arange(rows), idx] -= 1.0
        grad *= g / rows
        return (grad.reshape(logits.shape),)

    return Tensor._make(value, (logits,), rule, "softmax_cross_entropy")


def l2_loss(pred: Tensor, target: ArrayLike) -> Tensor:
    """Mean of squared elementwise differences."""
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if t.shape != pred.shape:
        raise DimensionError(f"l2_loss shapes differ: {pred.shape} vs {t.shape}")
    diff = pred.data - t
    n = max(diff.size, 1)
    value = np.array(float(np.sum(diff * diff) / n))
    return Tensor._make(value, (pred,), lambda g: (g * 2.0 * diff / n,), "l2_loss")


def softmax_probabilities(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of raw logits (inference only)."""
    return softmax(np.atleast_2d(logits), axis=1)
