"""Linear-interpolant flow matching: x_t = t x1 + (1 - t) eps, target v = x1 - eps."""
from typing import Union

import numpy as np

from ..exceptions import ConditionException, ShapeMismatchException
from ..tensor import Tensor, ops

Time = Union[float, np.ndarray]


def _check(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchException(op, a.shape, b.shape)


def _per_sample(t: Time, ndim: int) -> Union[float, np.ndarray]:
    """Scalar t as is; a [B] vector of times reshaped to broadcast over [B, ...]."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        return float(t)
    return t.reshape(t.shape + (1,) * (ndim - t.ndim))


def interpolant(x1: np.ndarray, eps: np.ndarray, t: Time) -> np.ndarray:
    _check("interpolant", x1, eps)
    t = _per_sample(t, x1.ndim)
    return t * x1 + (1.0 - t) * eps


def velocity_target(x1: np.ndarray, eps: np.ndarray) -> np.ndarray:
    _check("velocity_target", x1, eps)
    return x1 - eps


def fm_loss(pred: Tensor, target: np.ndarray, loss_mask: np.ndarray) -> Tensor:
    """Mean squared error over the frames ``loss_mask`` keeps.

    ``pred`` and ``target`` are [B, T, ...] (or [T, ...]); ``loss_mask`` is
    [B, T] (or [T]). Excluded frames get exactly zero gradient.
    """
    _check("fm_loss", pred.data, target)
    mask = np.asarray(loss_mask, dtype=bool)
    if mask.shape != pred.shape[: mask.ndim]:
        raise ShapeMismatchException("fm_loss", pred.shape, mask.shape)
    weights = np.broadcast_to(mask.reshape(mask.shape + (1,) * (pred.ndim - mask.ndim)), pred.shape)
    count = int(weights.sum())
    if count == 0:
        raise ConditionException("loss mask excludes every frame")
    diff = pred - Tensor(target, dtype=pred.dtype)
    return ops.sum(diff * diff * Tensor(weights / count, dtype=pred.dtype))
