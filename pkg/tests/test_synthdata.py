from pathlib import Path

import numpy as np
import pytest

from src.config import settings
from src.constants import GuidanceScheme, TaskKind
from src.exceptions import CheckpointException, ClipSpecException
from src.flow import GuidanceConfig, SamplerConfig
from src.model import StivConfig, StivModel, codec
from src.synthdata import (
    CaptionDAO,
    ClipSpec,
    FrameDAO,
    all_specs,
    eval_suite,
    export_corpus,
    generate_clip,
    heldout_loss,
    import_clip,
    is_heldout,
    load_video,
    motion_oracle,
    save_video,
    score_videos,
    split_corpus,
)
from src.tensor import RngState


def _small(shape="square", color="red", direction="right", speed=1) -> ClipSpec:
    return ClipSpec(
        shape=shape, color=color, direction=direction, speed=speed, num_frames=4, height=8, width=8, size=2
    )


def test_corpus_covers_every_attribute_combination():
    specs = all_specs()
    assert len(specs) == 72
    assert len({s.key for s in specs}) == 72
    assert {s.speed for s in specs} == {1, 2}


def test_heldout_split_is_a_stable_hash_partition():
    train, heldout = split_corpus(all_specs())
    assert len(train) + len(heldout) == 72
    assert sorted(s.key for s in heldout) == ["circle-green-right-1", "circle-red-down-1", "circle-red-right-2"]
    assert all(is_heldout(s) for s in heldout)
    assert not any(is_heldout(s) for s in train)


def test_clip_rendering_moves_a_solid_sprite():
    clip = generate_clip(ClipSpec(shape="square", color="blue", direction="down", speed=2))
    assert clip.pixels.shape == (8, 32, 32, 3)
    assert clip.pixels.dtype == np.uint8
    lit = clip.pixels.any(axis=-1)
    assert all(frame.sum() == 64 for frame in lit)
    np.testing.assert_array_equal(np.unique(clip.pixels.reshape(-1, 3), axis=0), [[0, 0, 0], [0, 0, 255]])
    rows = [np.argwhere(frame)[:, 0].min() for frame in lit]
    assert np.all(np.diff(rows) == 2)
    assert clip.tokens == ["a", "blue", "square", "moves", "down", "quickly"]


def test_spec_that_leaves_the_frame_is_rejected():
    with pytest.raises(ClipSpecException):
        ClipSpec(shape="circle", color="red", direction="left", speed=2, num_frames=20, height=16, width=16)


@pytest.mark.parametrize("direction", ["up", "down", "left", "right"])
@pytest.mark.parametrize("shape", ["square", "circle", "triangle"])
def test_oracle_reads_ground_truth_direction(shape, direction):
    clip = generate_clip(ClipSpec(shape=shape, color="green", direction=direction, speed=1))
    verdict = motion_oracle(clip.pixels)
    assert verdict.direction == direction
    assert verdict.speed == pytest.approx(1.0)
    assert verdict.confidence == 1.0


def test_oracle_flags_still_and_black_videos_as_static():
    still = generate_clip(ClipSpec(shape="circle", color="red", direction="up", speed=0))
    assert motion_oracle(still.pixels).is_static
    assert motion_oracle(np.zeros((4, 8, 8, 3), dtype=np.uint8)).is_static


def test_score_videos_counts_matching_directions():
    specs = [_small(direction="right"), _small(direction="left")]
    videos = [generate_clip(specs[0]).pixels, generate_clip(specs[0]).pixels]
    scores = score_videos(videos, specs)
    assert scores == {"direction_accuracy": 0.5, "motion_presence_rate": 1.0}


def test_ppm_frames_and_videos_round_trip(tmp_path):
    pixels = generate_clip(_small()).pixels
    paths = save_video(tmp_path / "video", pixels)
    assert [Path(p).name for p in paths] == [f"frame_{k:04d}.ppm" for k in range(4)]
    assert (tmp_path / "video" / "frame_0000.ppm").read_bytes().startswith(b"P6\n8 8\n255\n")
    np.testing.assert_array_equal(load_video(tmp_path / "video"), pixels)


def test_ppm_decoder_skips_comments_and_rejects_truncation():
    frame = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    payload = b"P6\n# written by hand\n3 2\n255\n" + frame.tobytes()
    np.testing.assert_array_equal(FrameDAO.decode(payload), frame)
    with pytest.raises(CheckpointException):
        FrameDAO.decode(payload[:-1])
    with pytest.raises(CheckpointException):
        FrameDAO.encode(frame.astype(np.float32))


def test_missing_video_directory_raises(tmp_path):
    with pytest.raises(CheckpointException):
        load_video(tmp_path / "nothing")


def test_exported_corpus_imports_back(tmp_path):
    specs = [_small(), _small(shape="triangle", direction="up")]
    dirs = export_corpus(tmp_path, specs)
    assert [d.name for d in dirs] == ["clip_000", "clip_001"]
    pixels, caption = import_clip(dirs[1])
    np.testing.assert_array_equal(pixels, generate_clip(specs[1]).pixels)
    assert caption == specs[1].caption
    assert CaptionDAO.load(dirs[0], "caption") == ["a", "red", "square", "moves", "right", "slowly"]


def test_eval_suite_keeps_pinned_frames_exact(tiny_config):
    model = StivModel(tiny_config, RngState(seed=0))
    specs = [_small(), _small(color="green", direction="down")]
    report = eval_suite(
        model,
        specs,
        [TaskKind.TI2V, TaskKind.T2V],
        GuidanceConfig(scheme=GuidanceScheme.JIT, s=2.0),
        SamplerConfig(n_steps=2),
        heldout=specs[:1],
    )
    assert report.n_samples == 4
    assert report.first_frame_exact_rate == 1.0
    assert report.nan_free_rate == 1.0
    assert report.heldout_loss is not None and np.isfinite(report.heldout_loss)


def test_eval_suite_reports_do_not_depend_on_thread_count(tiny_config, monkeypatch):
    model = StivModel(tiny_config, RngState(seed=0))
    specs = [_small(), _small(color="blue", direction="up")]

    def report():
        guidance = GuidanceConfig(scheme=GuidanceScheme.SIT, s1=1.5, s2=2.0)
        return eval_suite(model, specs, [TaskKind.TI2V], guidance, SamplerConfig(n_steps=2), samples_per_spec=2)

    sequential = report()
    monkeypatch.setattr(settings, "STIV_THREADS", 3)
    assert report() == sequential
    assert sequential.n_samples == 4


def test_heldout_loss_is_none_without_specs_and_fixed_per_seed(tiny_config):
    model = StivModel(tiny_config, RngState(seed=0))
    assert heldout_loss(model, []) is None
    specs = [_small(direction="left")]
    assert heldout_loss(model, specs, seed=3) == heldout_loss(model, specs, seed=3)


def test_fresh_model_loss_is_the_target_energy(float64, tiny_config):
    """A zero-velocity model scores the mean of |x1 - eps|^2 over the held-out times."""
    model = StivModel(tiny_config, RngState(seed=0))
    spec = _small(color="blue")
    x1 = codec.encode(generate_clip(spec).pixels)[None]
    rng = RngState(seed=0)
    expected = np.mean([np.mean((x1 - rng.generator().standard_normal(x1.shape)) ** 2) for _ in range(3)])
    assert heldout_loss(model, [spec], seed=0) == pytest.approx(expected, rel=1e-9)


@pytest.mark.slow
def test_untrained_model_scores_no_better_than_chance():
    config = StivConfig(
        n_blocks=1,
        hidden_dim=16,
        n_heads=2,
        text_dim=8,
        frequency_dim=8,
        latent_frames=8,
        latent_height=16,
        latent_width=16,
        temporal_patch=1,
        n_decoder_blocks=0,
    )
    model = StivModel(config, RngState(seed=0))
    report = eval_suite(
        model,
        all_specs(),
        [TaskKind.T2V],
        GuidanceConfig(scheme=GuidanceScheme.NONE),
        SamplerConfig(n_steps=1),
        samples_per_spec=4,
    )
    assert report.n_samples == 288
    assert report.first_frame_exact_rate is None
    assert report.direction_accuracy < 0.35
