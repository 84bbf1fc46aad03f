from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..constants import SPEED_WORDS
from ..exceptions import ClipSpecException
from ..model import MicroConditions

Shape = Literal["square", "circle", "triangle"]
Color = Literal["red", "green", "blue"]
Direction = Literal["up", "down", "left", "right"]

# (row, col) step of one pixel in each direction
DIRECTION_STEPS = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}


class ClipSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    shape: Shape
    color: Color
    direction: Direction
    speed: int = Field(1, ge=0, le=2)
    num_frames: int = Field(8, ge=1)
    height: int = Field(32, ge=4)
    width: int = Field(32, ge=4)
    size: int = Field(8, ge=2)
    start: Optional[Tuple[int, int]] = None

    @property
    def key(self) -> str:
        return f"{self.shape}-{self.color}-{self.direction}-{self.speed}"

    @property
    def caption(self) -> List[str]:
        return ["a", self.color, self.shape, "moves", self.direction, SPEED_WORDS[self.speed]]

    def start_position(self) -> Tuple[int, int]:
        """Top-left corner of the object in frame 0; by default the path is centred."""
        if self.start is not None:
            return self.start
        travel = self.speed * (self.num_frames - 1)
        dr, dc = DIRECTION_STEPS[self.direction]
        row = (self.height - self.size - dr * travel) // 2 if dr else (self.height - self.size) // 2
        col = (self.width - self.size - dc * travel) // 2 if dc else (self.width - self.size) // 2
        return row, col

    def positions(self) -> List[Tuple[int, int]]:
        row, col = self.start_position()
        dr, dc = DIRECTION_STEPS[self.direction]
        return [(row + dr * self.speed * k, col + dc * self.speed * k) for k in range(self.num_frames)]

    @model_validator(mode="after")
    def check_in_bounds(self) -> "ClipSpec":
        for row, col in (self.positions()[0], self.positions()[-1]):
            if row < 0 or col < 0 or row + self.size > self.height or col + self.size > self.width:
                raise ClipSpecException(f"{self.key}: object leaves the {self.height}x{self.width} frame")
        return self


class Clip(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: ClipSpec
    pixels: np.ndarray
    tokens: List[str]
    micro: MicroConditions


class MotionVerdict(BaseModel):
    direction: Optional[Direction] = None
    speed: float = 0.0
    confidence: float = 0.0

    @property
    def is_static(self) -> bool:
        return self.direction is None


class EvalReport(BaseModel):
    n_samples: int
    first_frame_exact_rate: Optional[float] = None
    direction_accuracy: float
    motion_presence_rate: float
    heldout_loss: Optional[float] = None
    nan_free_rate: float
