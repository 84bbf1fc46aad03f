from typing import Callable

import numpy as np

from ..constants import NORM_EPS
from ..exceptions import RopeTableException
from ..tensor import Tensor, ops
from .schemas import Modulation, RopeTable


def rms_norm(x: Tensor, gain: Tensor, eps: float = NORM_EPS) -> Tensor:
    return ops.rms_norm_core(x, eps) * gain


def stateless_layer_norm(x: Tensor, eps: float = NORM_EPS) -> Tensor:
    return ops.layer_norm_core(x, eps)


def rope_apply(qk: Tensor, table: RopeTable, positions: np.ndarray) -> Tensor:
    """Rotate ``qk`` of shape [..., P, head_dim] by the table's angles at ``positions``."""
    head_dim = qk.shape[-1]
    if head_dim != table.head_dim:
        raise RopeTableException(f"head_dim {head_dim} does not match table head_dim {table.head_dim}")
    if head_dim % 2 or (table.kind == "spatial_2d" and head_dim % 4):
        raise RopeTableException(f"head_dim {head_dim} cannot be split into rotation pairs")
    angles = table.angles(positions).astype(qk.dtype)
    if angles.shape[0] != qk.shape[-2]:
        raise RopeTableException(f"{angles.shape[0]} positions for {qk.shape[-2]} tokens")
    if angles.shape[0]:
        extent = np.asarray(positions).reshape(angles.shape[0], -1).max(axis=0) + 1
        if np.any(extent > np.resize(table.max_positions, extent.shape)):
            raise RopeTableException(f"positions up to {(extent - 1).tolist()} exceed max_positions {table.max_positions}")
    return ops.rotary(qk, np.cos(angles), np.sin(angles))


def sandwich(
    x: Tensor,
    inner: Callable[[Tensor], Tensor],
    pre_gain: Tensor,
    post_gain: Tensor,
    mod: Modulation,
    eps: float = NORM_EPS,
) -> Tensor:
    """x + gate * norm(inner(scale * norm(x) + shift))."""
    h = stateless_layer_norm(x, eps) * pre_gain
    h = h * mod.scale + mod.shift
    y = stateless_layer_norm(inner(h), eps) * post_gain
    return x + y * mod.gate
