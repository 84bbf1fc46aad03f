from concurrent.futures import ThreadPoolExecutor
from contextvars import copy_context
from typing import Callable, List, Optional, Union

import numpy as np
from tqdm import tqdm

from ..config import settings
from ..conditioning import TaskMode, micro_for_mode, pin_state
from ..constants import GuidanceScheme
from ..exceptions import ConditionException, NonFiniteException
from ..logger import logger
from ..model import Condition, MicroConditions, StivConfig, StivModel, VideoLatent
from ..tensor import RngState, get_default_dtype, no_grad
from .guidance import combine
from .schemas import GuidanceConfig, SamplerConfig

VelocityFn = Callable[[VideoLatent, float, Condition], np.ndarray]


def guidance_branches(condition: Condition, guidance: GuidanceConfig) -> List[Condition]:
    """Conditions of the branches ``combine`` expects, in its order."""
    joint = condition
    null = Condition(text=None, image=None)
    if guidance.scheme == GuidanceScheme.NONE:
        return [joint]
    if guidance.scheme == GuidanceScheme.JIT:
        return [null, joint]
    return [null, condition.without_text(), joint]


def initial_noise(config: StivConfig, mode: TaskMode, sampler: SamplerConfig) -> np.ndarray:
    rng = RngState(seed=sampler.seed)
    shape = (mode.num_frames, config.latent_height, config.latent_width, config.latent_channels)
    return rng.generator().standard_normal(shape).astype(get_default_dtype())


def euler_sample(
    model: Union[StivModel, VelocityFn],
    condition: Condition,
    mode: TaskMode,
    guidance: GuidanceConfig,
    sampler: SamplerConfig,
    config: Optional[StivConfig] = None,
    micro: Optional[MicroConditions] = None,
) -> VideoLatent:
    """Integrate dx/dt = F(x, c, t) from noise at t = 0 with re-pinning after every step.

    ``model`` is a StivModel or any callable (latent, t, condition) -> velocity
    array; for a bare callable ``config`` supplies the latent geometry.
    """
    velocity = model.velocity if isinstance(model, StivModel) else model
    config = model.config if isinstance(model, StivModel) else config
    if config is None:
        raise ConditionException("sampling with a bare velocity function needs a StivConfig for the latent geometry")
    micro = micro or micro_for_mode(config, mode)
    branches = guidance_branches(condition, guidance)
    dt = 1.0 / sampler.n_steps
    workers = min(settings.STIV_THREADS, len(branches))
    log = logger.bind(mode=mode.kind.value, scheme=guidance.scheme.value, steps=sampler.n_steps)
    log.debug("sampling")

    state = VideoLatent(data=initial_noise(config, mode, sampler), micro=micro)
    with no_grad(), ThreadPoolExecutor(max_workers=workers) as pool:
        steps = tqdm(sampler.times(), desc="euler", disable=not settings.PROGRESS_BARS, leave=False)
        for t in steps:
            state = pin_state(state, condition.image, mode)
            if workers > 1:
                # branches inherit this context, grad mode included
                futures = [pool.submit(copy_context().run, velocity, state, t, c) for c in branches]
                fields = [f.result() for f in futures]
            else:
                fields = [velocity(state, t, c) for c in branches]
            guided = combine(guidance, fields)
            data = state.data + dt * guided
            if not np.isfinite(data).all():
                log.error(f"non-finite state at t={t:.4f}")
                raise NonFiniteException("euler_sample", data.shape)
            state = state.model_copy(update={"data": data.astype(state.data.dtype)})
        state = pin_state(state, condition.image, mode)
    return state
