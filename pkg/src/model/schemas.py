from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..constants import (
    MICRO_FIELDS,
    MODEL_PRESETS,
    NORM_EPS,
    PRESET_TEXT_DIM,
    ROPE_BASE,
    VOCABULARY,
    MaskAxis,
)


class StivConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_blocks: int = Field(2, ge=1)
    hidden_dim: int = Field(64, gt=0)
    n_heads: int = Field(4, gt=0)
    text_dim: int = Field(64, gt=0)
    vocab_size: int = Field(len(VOCABULARY), gt=2)
    ffn_ratio: int = Field(4, ge=1)
    frequency_dim: int = Field(64, ge=2)

    latent_channels: int = Field(12, ge=1)
    latent_frames: int = Field(8, ge=1)
    latent_height: int = Field(16, ge=1)
    latent_width: int = Field(16, ge=1)
    spatial_patch: int = Field(2, ge=1)
    temporal_patch: Literal[1, 2, 4] = 2

    mask_ratio: float = Field(0.5, ge=0.0, lt=1.0)
    mask_axis: MaskAxis = MaskAxis.SPATIAL
    n_decoder_blocks: int = Field(2, ge=0)

    temporal_attention: bool = True
    causal_temporal: bool = False
    temporal_modulation: bool = False
    first_frame_loss: bool = False

    text_dropout_p: float = Field(0.10, ge=0.0, le=1.0)
    image_dropout_p: float = Field(0.08, ge=0.0, le=1.0)

    rope_base: float = ROPE_BASE
    spatial_rope_scale: float = Field(1.0, ge=0.0)
    temporal_rope_scale: float = Field(1.0, ge=0.0)
    norm_eps: float = NORM_EPS

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.n_heads

    @property
    def patch_dim(self) -> int:
        return self.temporal_patch * self.spatial_patch ** 2 * self.latent_channels

    @property
    def grid(self) -> tuple:
        return (self.latent_height // self.spatial_patch, self.latent_width // self.spatial_patch)

    @property
    def modulation_chunks(self) -> int:
        # shift/scale/gate for spatial attention and FFN, plus temporal attention when modulated
        return 9 if self.temporal_attention and self.temporal_modulation else 6

    @model_validator(mode="after")
    def check_geometry(self) -> "StivConfig":
        if self.hidden_dim % self.n_heads:
            raise ValueError(f"n_heads {self.n_heads} does not divide hidden_dim {self.hidden_dim}")
        if self.head_dim % 4:
            raise ValueError(f"head_dim {self.head_dim} must be divisible by 4 for 2D RoPE")
        if self.latent_height % self.spatial_patch or self.latent_width % self.spatial_patch:
            raise ValueError("latent height/width must be divisible by spatial_patch")
        return self

    @classmethod
    def preset(cls, name: str, **overrides) -> "StivConfig":
        blocks, hidden, heads, _ = MODEL_PRESETS[name]
        values = dict(
            n_blocks=blocks,
            hidden_dim=hidden,
            n_heads=heads,
            text_dim=PRESET_TEXT_DIM,
            frequency_dim=256,
            latent_channels=4,
            latent_frames=20,
            latent_height=32,
            latent_width=32,
        )
        values.update(overrides)
        return cls(**values)


class MicroConditions(BaseModel):
    height: int = Field(ge=0)
    width: int = Field(ge=0)
    crop_top: int = Field(0, ge=0)
    crop_left: int = Field(0, ge=0)
    sampling_stride: int = Field(1, ge=0)
    num_frames: int = Field(ge=0)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in MICRO_FIELDS], dtype=np.float64)


class VideoLatent(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    data: np.ndarray
    micro: MicroConditions

    @field_validator("data")
    @classmethod
    def check_rank(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim != 4 or value.shape[0] < 1:
            raise ValueError(f"latent must be [T>=1, H, W, C], got {value.shape}")
        return value

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]


class TextCondition(BaseModel):
    token_ids: List[int] = Field(min_length=1)


class ImageCondition(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    frames: np.ndarray
    frame_indices: List[int]

    @model_validator(mode="after")
    def check_frames(self) -> "ImageCondition":
        if sorted(set(self.frame_indices)) != list(self.frame_indices):
            raise ValueError("frame_indices must be sorted and unique")
        if self.frames.ndim != 4 or self.frames.shape[0] != len(self.frame_indices):
            raise ValueError(f"{len(self.frame_indices)} indices for frames of shape {self.frames.shape}")
        return self


class Condition(BaseModel):
    text: Optional[TextCondition] = None
    image: Optional[ImageCondition] = None
    text_dropped: bool = False
    image_dropped: bool = False

    def without_text(self) -> "Condition":
        return self.model_copy(update={"text": None})

    def without_image(self) -> "Condition":
        return self.model_copy(update={"image": None})


class ConditionBatch(BaseModel):
    """Collated model inputs besides the latent state."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    text_ids: np.ndarray
    text_mask: np.ndarray
    micro: np.ndarray
    pinned: np.ndarray

    @property
    def size(self) -> int:
        return self.text_ids.shape[0]

    @classmethod
    def collate(
        cls,
        texts: Sequence[Optional[TextCondition]],
        micro: Sequence[MicroConditions],
        pinned: np.ndarray,
        null_id: int,
        pad_id: int,
    ) -> "ConditionBatch":
        sequences = [list(t.token_ids) if t is not None else [null_id] for t in texts]
        length = max(len(s) for s in sequences)
        ids = np.full((len(sequences), length), pad_id, dtype=np.int64)
        mask = np.zeros((len(sequences), length), dtype=bool)
        for i, seq in enumerate(sequences):
            ids[i, : len(seq)] = seq
            mask[i, : len(seq)] = True
        return cls(
            text_ids=ids,
            text_mask=mask,
            micro=np.stack([m.as_array() for m in micro]),
            pinned=np.asarray(pinned, dtype=bool),
        )
