from collections import Counter

import numpy as np
import pytest

from src.conditioning import (
    LossMask,
    TaskMode,
    apply_frame_replacement,
    choose_task_mode,
    image_condition,
    micro_for_mode,
    pinned_frames,
    replace_batch,
    sample_training_condition,
)
from src.constants import TaskKind
from src.exceptions import ConditionException
from src.flow import fm_loss
from src.model import Condition, ImageCondition, MicroConditions, StivConfig, VideoLatent, vocabulary
from src.tensor import RngState, grad, parameter


def _latent(frames: int = 8, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((frames, 4, 4, 12))


@pytest.mark.parametrize(
    "kind, frames, expected",
    [
        (TaskKind.T2V, 8, ()),
        (TaskKind.TI2V, 8, (0,)),
        (TaskKind.PREDICT4, 8, (0, 1, 2, 3)),
        (TaskKind.INTERPOLATE, 20, (0, 19)),
        (TaskKind.KEYFRAME, 20, ()),
        (TaskKind.UPSAMPLE2, 8, (0, 2, 4, 6)),
    ],
)
def test_pinned_frame_sets(kind, frames, expected):
    assert pinned_frames(kind, frames) == expected
    assert TaskMode(kind=kind, num_frames=frames).pinned_frame_indices == expected


def test_mode_that_pins_every_frame_is_rejected():
    with pytest.raises(ConditionException):
        TaskMode(kind=TaskKind.PREDICT4, num_frames=4)
    with pytest.raises(ConditionException):
        TaskMode(kind=TaskKind.INTERPOLATE, num_frames=2)


def test_ti2v_replacement_pins_frame_zero_and_masks_its_loss():
    clean, noisy = _latent(seed=1), _latent(seed=2)
    mode = TaskMode(kind=TaskKind.TI2V, num_frames=8)
    micro = MicroConditions(height=8, width=8, num_frames=8)
    state, mask = apply_frame_replacement(VideoLatent(data=noisy, micro=micro), image_condition(clean, mode), mode)
    np.testing.assert_array_equal(state.data[0], clean[0])
    np.testing.assert_array_equal(state.data[1:], noisy[1:])
    assert mask.frames == [False] + [True] * 7


def test_first_frame_loss_flag_keeps_pinned_frames_in_the_loss():
    mode = TaskMode(kind=TaskKind.PREDICT4, num_frames=8)
    assert LossMask.for_mode(mode, first_frame_loss=True).frames == [True] * 8
    assert LossMask.for_mode(mode).frames == [False] * 4 + [True] * 4


def test_replacement_rejects_missing_extra_and_misshapen_images():
    micro = MicroConditions(height=8, width=8, num_frames=8)
    x = VideoLatent(data=_latent(), micro=micro)
    ti2v = TaskMode(kind=TaskKind.TI2V, num_frames=8)
    t2v = TaskMode(kind=TaskKind.T2V, num_frames=8)
    with pytest.raises(ConditionException):
        apply_frame_replacement(x, None, ti2v)
    with pytest.raises(ConditionException):
        apply_frame_replacement(x, image_condition(_latent(), ti2v), t2v)
    wrong = ImageCondition(frames=np.zeros((1, 2, 2, 12)), frame_indices=[0])
    with pytest.raises(ConditionException):
        apply_frame_replacement(x, wrong, ti2v)


def test_batched_replacement_flags_and_zero_gradient_on_pinned_frames(float64):
    clean = np.stack([_latent(seed=3), _latent(seed=4)])
    noisy = np.stack([_latent(seed=5), _latent(seed=6)])
    modes = [TaskMode(kind=TaskKind.INTERPOLATE, num_frames=8), TaskMode(kind=TaskKind.T2V, num_frames=8)]
    images = [image_condition(c, m) for c, m in zip(clean, modes)]
    state, loss_mask, pinned = replace_batch(noisy, images, modes)
    np.testing.assert_array_equal(state[0, [0, 7]], clean[0, [0, 7]])
    np.testing.assert_array_equal(state[1], noisy[1])
    np.testing.assert_array_equal(pinned[0], [True] + [False] * 6 + [True])
    assert not pinned[1].any()
    np.testing.assert_array_equal(loss_mask, ~pinned)

    pred = parameter(np.random.default_rng(0).standard_normal(noisy.shape))
    (g,) = grad(fm_loss(pred, clean - noisy, loss_mask), [pred])
    np.testing.assert_array_equal(g.data[0, [0, 7]], 0.0)
    assert np.all(g.data[0, 1:7] != 0.0)


def test_condition_dropout_rates_are_independent():
    config = StivConfig()
    rng = RngState(seed=0)
    full = Condition(
        text=vocabulary.condition(["a", "red", "square"]),
        image=ImageCondition(frames=np.zeros((1, 2, 2, 12)), frame_indices=[0]),
    )
    n = 5000
    outcomes = [sample_training_condition(rng, full, config) for _ in range(n)]
    text = np.array([c.text is None for c in outcomes])
    image = np.array([c.image is None for c in outcomes])
    assert abs(text.mean() - 0.10) < 0.015
    assert abs(image.mean() - 0.08) < 0.015
    assert abs((text & image).mean() - 0.008) < 0.005
    assert all(c.text_dropped for c in outcomes if c.text is None)
    assert all(c.image_dropped for c in outcomes if c.image is None)


def test_task_mode_choice_follows_weights():
    rng = RngState(seed=1)
    only = {choose_task_mode(rng, {TaskKind.TI2V: 1.0, TaskKind.T2V: 0.0}, 8).kind for _ in range(50)}
    assert only == {TaskKind.TI2V}
    counts = Counter(choose_task_mode(rng, {TaskKind.TI2V: 1.0, TaskKind.T2V: 1.0}, 8).kind for _ in range(2000))
    assert abs(counts[TaskKind.TI2V] / 2000 - 0.5) < 0.05


def test_task_mode_weights_must_have_positive_mass():
    with pytest.raises(ConditionException):
        choose_task_mode(RngState(seed=0), {TaskKind.TI2V: 0.0}, 8)


def test_keyframe_micro_conditions_use_stride_twenty():
    config = StivConfig(latent_height=16, latent_width=16)
    key = micro_for_mode(config, TaskMode(kind=TaskKind.KEYFRAME, num_frames=20))
    plain = micro_for_mode(config, TaskMode(kind=TaskKind.TI2V, num_frames=8))
    assert (key.sampling_stride, key.num_frames, key.height) == (20, 20, 32)
    assert (plain.sampling_stride, plain.num_frames) == (1, 8)
