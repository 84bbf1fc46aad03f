from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..constants import KEYFRAME_STRIDE, TaskKind
from ..exceptions import ConditionException
from ..model import Condition, ImageCondition, MicroConditions, StivConfig, VideoLatent
from ..model.codec import DOWNSAMPLE
from ..tensor import RngState
from .schemas import LossMask, TaskMode


def _check_image(image: Optional[ImageCondition], mode: TaskMode, latent: np.ndarray) -> None:
    pins = mode.pinned_frame_indices
    if not pins:
        if image is not None:
            raise ConditionException(f"{mode.kind.value} takes no image condition, got frames {image.frame_indices}")
        return
    if image is None:
        raise ConditionException(f"{mode.kind.value} needs image frames {list(pins)}")
    if tuple(image.frame_indices) != pins:
        raise ConditionException(f"image frames {image.frame_indices} do not match {mode.kind.value} pins {list(pins)}")
    if image.frames.shape[1:] != latent.shape[1:]:
        raise ConditionException(f"image frames of shape {image.frames.shape[1:]} for latent frames {latent.shape[1:]}")


def pin_state(x: VideoLatent, image: Optional[ImageCondition], mode: TaskMode) -> VideoLatent:
    """Overwrite the pinned frames of ``x`` with the clean condition frames."""
    _check_image(image, mode, x.data)
    if image is None:
        return x
    data = x.data.copy()
    data[list(image.frame_indices)] = image.frames.astype(data.dtype)
    return x.model_copy(update={"data": data})


def apply_frame_replacement(
    x_t: VideoLatent,
    image: Optional[ImageCondition],
    mode: TaskMode,
    first_frame_loss: bool = False,
) -> Tuple[VideoLatent, LossMask]:
    return pin_state(x_t, image, mode), LossMask.for_mode(mode, first_frame_loss)


def image_condition(latent: np.ndarray, mode: TaskMode) -> Optional[ImageCondition]:
    """The clean frames of ``latent`` that ``mode`` pins, or None."""
    pins = list(mode.pinned_frame_indices)
    if not pins:
        return None
    return ImageCondition(frames=np.array(latent[pins]), frame_indices=pins)


def replace_batch(
    x_t: np.ndarray,
    images: Sequence[Optional[ImageCondition]],
    modes: Sequence[TaskMode],
    first_frame_loss: bool = False,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frame replacement over [B, T, H, W, C]; returns (state, loss mask [B, T], pinned [B, T])."""
    out = x_t.copy()
    b, frames = x_t.shape[:2]
    loss_mask = np.ones((b, frames), dtype=bool)
    pinned = np.zeros((b, frames), dtype=bool)
    for i, (image, mode) in enumerate(zip(images, modes)):
        _check_image(image, mode, x_t[i])
        if image is None:
            continue
        out[i, list(image.frame_indices)] = image.frames.astype(out.dtype)
        pinned[i, list(image.frame_indices)] = True
        loss_mask[i] = LossMask.for_mode(mode, first_frame_loss).as_array()
    return out, loss_mask, pinned


def sample_training_condition(rng: RngState, condition: Condition, config: StivConfig) -> Condition:
    """Independently drop the caption (to the null prompt) and the image condition."""
    draws = rng.generator().random(2)
    drop_text = bool(draws[0] < config.text_dropout_p)
    drop_image = bool(draws[1] < config.image_dropout_p)
    update = {}
    if drop_text:
        update.update(text=None, text_dropped=True)
    if drop_image:
        update.update(image=None, image_dropped=True)
    return condition.model_copy(update=update) if update else condition


def choose_task_mode(rng: RngState, weights: Dict[TaskKind, float], num_frames: int) -> TaskMode:
    kinds = sorted(weights, key=lambda k: TaskKind(k).value)
    p = np.array([weights[k] for k in kinds], dtype=np.float64)
    if not kinds or (p < 0).any() or p.sum() <= 0:
        raise ConditionException(f"task mode weights must be non-negative with a positive sum, got {weights}")
    index = int(rng.generator().choice(len(kinds), p=p / p.sum()))
    return TaskMode(kind=kinds[index], num_frames=num_frames)


def micro_for_mode(config: StivConfig, mode: TaskMode) -> MicroConditions:
    stride = KEYFRAME_STRIDE if mode.kind == TaskKind.KEYFRAME else 1
    return MicroConditions(
        height=config.latent_height * DOWNSAMPLE,
        width=config.latent_width * DOWNSAMPLE,
        sampling_stride=stride,
        num_frames=mode.num_frames,
    )
