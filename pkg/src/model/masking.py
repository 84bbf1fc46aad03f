from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..constants import MaskAxis
from ..exceptions import MaskingException
from ..tensor import RngState, Tensor, ops, permutation

# token grid layout is [B, T, S, D]
_AXIS = {MaskAxis.SPATIAL: 2, MaskAxis.TEMPORAL: 1}


class MaskIndexSet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    axis: MaskAxis
    length: int
    kept: np.ndarray
    masked: np.ndarray

    @property
    def is_empty(self) -> bool:
        return self.masked.size == 0


def kept_count(length: int, mask_ratio: float) -> int:
    return max(1, int(np.floor((1.0 - mask_ratio) * length + 0.5)))


def mask_tokens(
    tokens: Tensor, mask_ratio: float, axis: MaskAxis, rng: RngState
) -> Tuple[Tensor, MaskIndexSet]:
    """Drop one random subset along ``axis``, the same subset in every frame (or site)."""
    if not 0.0 <= mask_ratio < 1.0:
        raise MaskingException(f"mask_ratio must lie in [0, 1), got {mask_ratio}")
    dim = _AXIS[MaskAxis(axis)]
    length = tokens.shape[dim]
    if mask_ratio == 0.0:
        empty = np.zeros(0, dtype=np.int64)
        return tokens, MaskIndexSet(axis=axis, length=length, kept=np.arange(length), masked=empty)
    order = permutation(rng, length)
    n_keep = kept_count(length, mask_ratio)
    kept = np.sort(order[:n_keep])
    masked = np.sort(order[n_keep:])
    return ops.take(tokens, kept, axis=dim), MaskIndexSet(axis=axis, length=length, kept=kept, masked=masked)


def unmask_tokens(processed: Tensor, index_set: MaskIndexSet, mask_token: Tensor) -> Tensor:
    """Scatter kept tokens back and fill the masked slots with ``mask_token``."""
    if np.intersect1d(index_set.kept, index_set.masked).size:
        raise MaskingException("kept and masked index sets overlap")
    if index_set.kept.size + index_set.masked.size != index_set.length:
        raise MaskingException(
            f"{index_set.kept.size} kept + {index_set.masked.size} masked != {index_set.length} slots"
        )
    dim = _AXIS[MaskAxis(index_set.axis)]
    if processed.shape[dim] != index_set.kept.size:
        raise MaskingException(f"{processed.shape[dim]} processed tokens for {index_set.kept.size} kept slots")
    if index_set.is_empty:
        return processed
    fill_shape = list(processed.shape)
    fill_shape[dim] = index_set.masked.size
    fill = ops.broadcast_to(mask_token, fill_shape)
    stacked = ops.concat([processed, fill], axis=dim)
    restore = np.argsort(np.concatenate([index_set.kept, index_set.masked]))
    return ops.take(stacked, restore, axis=dim)
