from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..constants import ROPE_BASE, RopeKind
from ..tensor import Tensor

Scalar = Union[Tensor, float]


class RopeTable(BaseModel):
    kind: RopeKind
    head_dim: int = Field(gt=0)
    base: float = Field(ROPE_BASE, gt=1.0)
    position_scale: float = Field(1.0, ge=0.0)
    max_positions: Tuple[int, ...] = (4096,)

    @model_validator(mode="after")
    def check_head_dim(self) -> "RopeTable":
        if self.head_dim % 2:
            raise ValueError(f"head_dim {self.head_dim} must be even")
        if self.kind == RopeKind.SPATIAL_2D and self.head_dim % 4:
            raise ValueError(f"spatial_2d needs head_dim divisible by 4, got {self.head_dim}")
        return self

    def _inv_freq(self, rotated_dims: int) -> np.ndarray:
        j = np.arange(rotated_dims // 2, dtype=np.float64)
        return self.base ** (-2.0 * j / rotated_dims)

    def angles(self, positions: np.ndarray) -> np.ndarray:
        """Rotation angle per (position, feature pair): shape [P, head_dim / 2]."""
        positions = np.asarray(positions, dtype=np.float64) * self.position_scale
        if self.kind == RopeKind.TEMPORAL_1D:
            return np.outer(positions.reshape(-1), self._inv_freq(self.head_dim))
        inv_freq = self._inv_freq(self.head_dim // 2)
        rows = np.outer(positions[:, 0], inv_freq)
        cols = np.outer(positions[:, 1], inv_freq)
        return np.concatenate([rows, cols], axis=-1)


class AttentionConfig(BaseModel):
    hidden_dim: int = Field(gt=0)
    n_heads: int = Field(gt=0)
    context_dim: Optional[int] = None
    causal: bool = False
    qk_norm: bool = True
    zero_out: bool = False

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.n_heads

    @model_validator(mode="after")
    def check_heads(self) -> "AttentionConfig":
        if self.head_dim * self.n_heads != self.hidden_dim:
            raise ValueError(f"n_heads {self.n_heads} does not divide hidden_dim {self.hidden_dim}")
        return self


class Modulation(NamedTuple):
    shift: Scalar
    scale: Scalar
    gate: Scalar

    @classmethod
    def identity(cls) -> "Modulation":
        return cls(shift=0.0, scale=1.0, gate=1.0)


class BlockModulation(NamedTuple):
    spatial: Modulation
    ffn: Modulation
    temporal: Modulation = Modulation.identity()


class TokenContext(BaseModel):
    """Per-forward metadata the blocks need besides the token grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    spatial_positions: np.ndarray
    temporal_positions: np.ndarray
    spatial_rope: RopeTable
    temporal_rope: RopeTable
    text: Tensor
    text_mask: np.ndarray

