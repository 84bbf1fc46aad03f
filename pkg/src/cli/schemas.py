import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..constants import TaskKind
from ..exceptions import ConfigException
from ..flow import GuidanceConfig, SamplerConfig
from ..model import StivConfig
from ..training import OptimizerConfig, TrainConfig


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_frames: int = Field(8, ge=1)
    height: int = Field(32, ge=4)
    width: int = Field(32, ge=4)
    train_on_heldout: bool = False
    eval_modes: List[TaskKind] = Field(default_factory=lambda: [TaskKind.TI2V, TaskKind.T2V])
    eval_samples_per_spec: int = Field(1, ge=1)
    eval_after_train: bool = True


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: StivConfig = Field(default_factory=StivConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    guidance: GuidanceConfig = Field(default_factory=GuidanceConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    seed: int = Field(0, ge=0)


def _first_error(exc: ValidationError) -> str:
    error = exc.errors()[0]
    key = ".".join(str(part) for part in error["loc"]) or "<root>"
    return f"{key}: {error['msg']}"


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigException(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from e
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigException(f"{source}: {_first_error(e)}") from e


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigException(f"cannot read config {path}: {e.strerror or e}") from e
    return parse_run_config(text, str(path))


class TensorEntry(BaseModel):
    name: str
    dtype: str
    shape: List[int]
    offset: int = Field(ge=0)
    nbytes: int = Field(ge=0)


class CheckpointHeader(BaseModel):
    manifest: List[TensorEntry]
    config: Dict[str, Any]
    meta: Dict[str, Any] = Field(default_factory=dict)


class Checkpoint(BaseModel):
    """Named tensors in ``params/``, ``ema/`` and ``optim/`` sections, a config blob and metadata."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    tensors: Dict[str, np.ndarray]
    config: Dict[str, Any]
    meta: Dict[str, Any] = Field(default_factory=dict)

    def section(self, prefix: str) -> Dict[str, np.ndarray]:
        head = prefix.rstrip("/") + "/"
        return {name[len(head):]: value for name, value in self.tensors.items() if name.startswith(head)}

    def has_section(self, prefix: str) -> bool:
        return bool(self.section(prefix))

    @property
    def stiv_config(self) -> StivConfig:
        return StivConfig.model_validate(self.config["model"])
