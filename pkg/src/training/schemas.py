from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..constants import OptimizerKind, TaskKind, TimestepSampling
from ..model import Condition, VideoLatent


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: OptimizerKind = OptimizerKind.ADAFACTOR
    lr: float = Field(3e-4, gt=0.0)
    warmup_steps: int = Field(100, ge=0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-30, gt=0.0)
    clip_threshold: float = Field(1.0, gt=0.0)
    weight_decay: float = Field(0.0, ge=0.0)

    def lr_at(self, step: int) -> float:
        """Constant learning rate after a linear warmup; ``step`` counts completed updates."""
        if self.warmup_steps == 0:
            return self.lr
        return self.lr * min(1.0, (step + 1) / self.warmup_steps)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(2000, ge=0)
    batch_size: int = Field(16, ge=1)
    grad_clip: float = Field(1.0, gt=0.0)
    ema_decay: float = Field(0.9999, ge=0.0, le=1.0)
    timestep_sampling: TimestepSampling = TimestepSampling.UNIFORM
    mode_weights: Dict[TaskKind, float] = Field(default_factory=lambda: {TaskKind.TI2V: 1.0})
    unmask_after_step: Optional[int] = Field(None, ge=0)
    log_every: int = Field(50, ge=1)
    checkpoint_every: int = Field(0, ge=0)

    @field_validator("mode_weights")
    @classmethod
    def check_weights(cls, value: Dict[TaskKind, float]) -> Dict[TaskKind, float]:
        if not value or any(w < 0 for w in value.values()) or sum(value.values()) <= 0:
            raise ValueError("mode_weights needs non-negative weights with a positive sum")
        return value

    def mask_ratio_at(self, step: int, mask_ratio: float) -> float:
        if self.unmask_after_step is not None and step >= self.unmask_after_step:
            return 0.0
        return mask_ratio


class TrainingExample(BaseModel):
    """One clean clip with its full (undropped) caption."""

    latent: VideoLatent
    condition: Condition


class StepRecord(BaseModel):
    step: int
    loss: float
    grad_norm: float
    lr: float


class EmaState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    decay: float = Field(0.9999, ge=0.0, le=1.0)
    shadow: Dict[str, np.ndarray]
