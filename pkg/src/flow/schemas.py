from pydantic import BaseModel, ConfigDict, Field

from ..constants import JIT_DEFAULT_SCALE, SAMPLER_DELTA, GuidanceScheme


class GuidanceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scheme: GuidanceScheme = GuidanceScheme.JIT
    s: float = JIT_DEFAULT_SCALE
    s1: float = 1.5
    s2: float = JIT_DEFAULT_SCALE
    renorm: bool = False

    @property
    def n_branches(self) -> int:
        return {GuidanceScheme.NONE: 1, GuidanceScheme.JIT: 2, GuidanceScheme.SIT: 3}[self.scheme]


class SamplerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_steps: int = Field(50, ge=1)
    delta: float = Field(SAMPLER_DELTA, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0)

    def times(self) -> list:
        """Evaluation time of each Euler step: k / n, clamped to 1 - delta."""
        return [min(k / self.n_steps, 1.0 - self.delta) for k in range(self.n_steps)]
