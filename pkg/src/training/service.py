from typing import Callable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..conditioning import (
    TaskMode,
    choose_task_mode,
    image_condition,
    micro_for_mode,
    replace_batch,
    sample_training_condition,
)
from ..config import settings
from ..constants import TaskKind, TimestepSampling
from ..exceptions import NonFiniteException, TrainingDivergedException
from ..flow import fm_loss, interpolant, velocity_target
from ..logger import logger
from ..model import StivModel, condition_batch
from ..tensor import RngState, Tensor, get_default_dtype, grad
from .ema import ema_init, ema_update
from .optim import Optimizer, build_optimizer, clip_grad_norm
from .schemas import EmaState, OptimizerConfig, StepRecord, TrainConfig, TrainingExample


def sample_timesteps(rng: RngState, n: int, sampling: TimestepSampling) -> np.ndarray:
    generator = rng.generator()
    if sampling == TimestepSampling.LOGIT_NORMAL:
        return 1.0 / (1.0 + np.exp(-generator.standard_normal(n)))
    return generator.random(n)


class Trainer:
    """Flow-matching training with condition dropout, frame replacement and MaskDiT masking."""

    def __init__(
        self,
        model: StivModel,
        train: TrainConfig,
        optimizer: OptimizerConfig,
        rng: RngState,
        ema: Optional[EmaState] = None,
        step: int = 0,
    ):
        self.model = model
        self.train_config = train
        self.named_params = list(model.named_parameters())
        self.optimizer: Optimizer = build_optimizer(self.named_params, optimizer)
        self.optimizer.step_count = step
        self.rng = rng
        self.ema = ema or ema_init(model, train.ema_decay)
        self.step = step

    def _modes(self, n: int, num_frames: int) -> List[TaskMode]:
        return [choose_task_mode(self.rng, self.train_config.mode_weights, num_frames) for _ in range(n)]

    def batch_loss(self, examples: Sequence[TrainingExample]) -> Tensor:
        """Loss of one batch; consumes the trainer's random stream in a fixed order."""
        model_config = self.model.config
        x1 = np.stack([e.latent.data for e in examples]).astype(np.float64)
        num_frames = x1.shape[1]
        modes = self._modes(len(examples), num_frames)

        conditions, images, micro = [], [], []
        for i, (example, clip) in enumerate(zip(examples, x1)):
            full = example.condition.model_copy(update={"image": image_condition(clip, modes[i])})
            cond = sample_training_condition(self.rng, full, model_config)
            if cond.image is None and modes[i].has_pins:
                # a dropped image condition collapses the sample to text-to-video
                modes[i] = TaskMode(kind=TaskKind.T2V, num_frames=num_frames)
            conditions.append(cond)
            images.append(cond.image)
            keyframe = modes[i].kind == TaskKind.KEYFRAME
            micro.append(micro_for_mode(model_config, modes[i]) if keyframe else example.latent.micro)

        t = sample_timesteps(self.rng, len(examples), self.train_config.timestep_sampling)
        eps = self.rng.generator().standard_normal(x1.shape)
        x_t = interpolant(x1, eps, t)
        x_t, loss_mask, _ = replace_batch(x_t, images, modes, model_config.first_frame_loss)
        batch = condition_batch(conditions, micro, num_frames)

        dtype = get_default_dtype()
        ratio = self.train_config.mask_ratio_at(self.step, model_config.mask_ratio)
        pred = self.model(Tensor(x_t, dtype=dtype), t, batch, mask_rng=self.rng, mask_ratio=ratio)
        return fm_loss(pred, velocity_target(x1, eps).astype(dtype), loss_mask)

    def train_step(self, examples: Sequence[TrainingExample]) -> StepRecord:
        try:
            loss = self.batch_loss(examples)
        except NonFiniteException as exc:
            logger.bind(step=self.step).error(f"forward diverged: {exc.detail}")
            raise TrainingDivergedException(self.step, exc.detail) from exc
        if not np.isfinite(loss.data):
            logger.bind(step=self.step).error("loss is not finite")
            raise TrainingDivergedException(self.step, f"loss {loss.item()}")

        params = [p for _, p in self.named_params]
        grads, norm = clip_grad_norm([g.data for g in grad(loss, params)], self.train_config.grad_clip)
        if not np.isfinite(norm):
            logger.bind(step=self.step).error("gradient norm is not finite")
            raise TrainingDivergedException(self.step, f"grad_norm {norm}")
        lr = self.optimizer.lr
        self.optimizer.step(grads)
        ema_update(self.ema, self.named_params)
        self.step += 1
        return StepRecord(step=self.step, loss=loss.item(), grad_norm=norm, lr=lr)

    def draw_batch(self, dataset: Sequence[TrainingExample]) -> List[TrainingExample]:
        indices = self.rng.generator().integers(len(dataset), size=self.train_config.batch_size)
        return [dataset[i] for i in indices]

    def fit(
        self,
        dataset: Sequence[TrainingExample],
        steps: Optional[int] = None,
        on_step: Optional[Callable[[StepRecord], None]] = None,
    ) -> List[StepRecord]:
        """Run ``steps`` updates (default: up to ``train.steps`` in total)."""
        target = self.train_config.steps if steps is None else self.step + steps
        records = []
        log_every = self.train_config.log_every
        progress = tqdm(total=max(target - self.step, 0), desc="train", disable=not settings.PROGRESS_BARS)
        while self.step < target:
            record = self.train_step(self.draw_batch(dataset))
            records.append(record)
            if record.step % log_every == 0 or record.step == target:
                logger.bind(step=record.step).info(
                    f"loss={record.loss:.5f} grad_norm={record.grad_norm:.4f} lr={record.lr:.2e}"
                )
            if on_step is not None:
                on_step(record)
            progress.update(1)
        progress.close()
        return records
