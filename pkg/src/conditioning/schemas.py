from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..constants import PREDICT_FRAMES, TaskKind
from ..exceptions import ConditionException


def pinned_frames(kind: TaskKind, num_frames: int) -> Tuple[int, ...]:
    kind = TaskKind(kind)
    if kind == TaskKind.TI2V:
        return (0,)
    if kind == TaskKind.PREDICT4:
        return tuple(range(PREDICT_FRAMES))
    if kind == TaskKind.INTERPOLATE:
        return (0, num_frames - 1) if num_frames > 1 else (0,)
    if kind == TaskKind.UPSAMPLE2:
        return tuple(range(0, num_frames, 2))
    return ()


class TaskMode(BaseModel):
    """A conditioning task over clips of ``num_frames`` latent frames."""

    kind: TaskKind
    num_frames: int = Field(ge=1)

    @model_validator(mode="after")
    def check_pins(self) -> "TaskMode":
        pins = pinned_frames(self.kind, self.num_frames)
        if any(i >= self.num_frames for i in pins):
            raise ConditionException(f"{self.kind.value} pins frames {pins} outside a {self.num_frames}-frame clip")
        if pins and len(pins) == self.num_frames:
            raise ConditionException(
                f"{self.kind.value} on {self.num_frames} frames pins every frame and leaves nothing to generate"
            )
        return self

    @property
    def pinned_frame_indices(self) -> Tuple[int, ...]:
        return pinned_frames(self.kind, self.num_frames)

    @property
    def has_pins(self) -> bool:
        return bool(self.pinned_frame_indices)


class LossMask(BaseModel):
    frames: List[bool] = Field(min_length=1)

    def as_array(self) -> np.ndarray:
        return np.array(self.frames, dtype=bool)

    @classmethod
    def for_mode(cls, mode: TaskMode, first_frame_loss: bool = False) -> "LossMask":
        frames = [True] * mode.num_frames
        if not first_frame_loss:
            for i in mode.pinned_frame_indices:
                frames[i] = False
        return cls(frames=frames)
