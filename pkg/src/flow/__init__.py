from .guidance import cfg_renorm, combine, jit_cfg, sit_cfg, sit_grid, velocity_to_score
from .objective import fm_loss, interpolant, velocity_target
from .sampler import VelocityFn, euler_sample, guidance_branches, initial_noise
from .schemas import GuidanceConfig, SamplerConfig
