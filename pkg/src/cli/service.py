from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..conditioning import TaskMode, micro_for_mode
from ..constants import RopeMode, TaskKind
from ..dao import PathLike
from ..exceptions import ConditionException, ConfigException, SurgeryException
from ..flow import GuidanceConfig, SamplerConfig, euler_sample, sit_grid
from ..logger import logger
from ..model import Condition, ImageCondition, StivConfig, StivModel, build_model, codec, vocabulary
from ..synthdata import EvalReport, FrameDAO, all_specs, eval_suite, save_video, split_corpus, training_examples
from ..tensor import RngState
from ..training import (
    EmaState,
    StepRecord,
    Trainer,
    ema_copy_to,
    extend_frames_init,
    init_from_both,
    init_t2v_from_t2i,
)
from .dao import CheckpointDAO, GridDAO, LossLogDAO, ReportDAO
from .schemas import Checkpoint, RunConfig

PARAMS, EMA, OPTIM = "params", "ema", "optim"


def _prefixed(prefix: str, tensors: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    return {f"{prefix}/{name}": value for name, value in tensors.items()}


class CheckpointService:
    @classmethod
    def from_trainer(cls, trainer: Trainer, config: RunConfig) -> Checkpoint:
        tensors = _prefixed(PARAMS, trainer.model.state_dict())
        tensors.update(_prefixed(EMA, trainer.ema.shadow))
        tensors.update(_prefixed(OPTIM, trainer.optimizer.state_dict()))
        meta = {
            "step": trainer.step,
            "rng_seed": trainer.rng.seed,
            "rng_counter": trainer.rng.counter,
            "optimizer_step": trainer.optimizer.step_count,
            "ema_decay": trainer.ema.decay,
        }
        return Checkpoint(tensors=tensors, config=config.model_dump(mode="json"), meta=meta)

    @classmethod
    def from_model(cls, model: StivModel, config: RunConfig, meta: Optional[dict] = None) -> Checkpoint:
        run = config.model_copy(update={"model": model.config})
        return Checkpoint(
            tensors=_prefixed(PARAMS, model.state_dict()), config=run.model_dump(mode="json"), meta=meta or {}
        )

    @classmethod
    def run_config(cls, checkpoint: Checkpoint) -> RunConfig:
        return RunConfig.model_validate(checkpoint.config)

    @classmethod
    def model(cls, checkpoint: Checkpoint, prefer_ema: bool = True) -> StivModel:
        """The model with EMA weights when the checkpoint has them and ``prefer_ema``, raw weights otherwise."""
        model = StivModel(checkpoint.stiv_config, RngState(seed=0))
        section = EMA if prefer_ema and checkpoint.has_section(EMA) else PARAMS
        model.load_state_dict(checkpoint.section(section))
        logger.bind(weights=section).debug("loaded model")
        return model

    @classmethod
    def load_model(cls, path: PathLike, prefer_ema: bool = True) -> Tuple[StivModel, RunConfig]:
        checkpoint = CheckpointDAO.load_path(path)
        return cls.model(checkpoint, prefer_ema), cls.run_config(checkpoint)

    @classmethod
    def restore_trainer(cls, checkpoint: Checkpoint, config: RunConfig) -> Trainer:
        meta = checkpoint.meta
        missing = [k for k in ("step", "rng_seed", "rng_counter", "optimizer_step") if k not in meta]
        if missing or not checkpoint.has_section(EMA) or not checkpoint.has_section(OPTIM):
            raise ConfigException(f"checkpoint cannot resume training (missing {missing or 'ema/optim sections'})")
        model = cls.model(checkpoint, prefer_ema=False)
        ema = EmaState(decay=meta.get("ema_decay", config.train.ema_decay), shadow=checkpoint.section(EMA))
        rng = RngState(seed=meta["rng_seed"], counter=meta["rng_counter"])
        trainer = Trainer(model, config.train, config.optimizer, rng, ema=ema, step=meta["step"])
        trainer.optimizer.load_state_dict(checkpoint.section(OPTIM), meta["optimizer_step"])
        return trainer


class TrainService:
    @classmethod
    def check_geometry(cls, config: RunConfig) -> None:
        model, data = config.model, config.data
        expected = (data.height // codec.DOWNSAMPLE, data.width // codec.DOWNSAMPLE, codec.LATENT_CHANNELS)
        actual = (model.latent_height, model.latent_width, model.latent_channels)
        if data.height % codec.DOWNSAMPLE or data.width % codec.DOWNSAMPLE or expected != actual:
            raise ConfigException(
                f"model latent geometry {actual} does not match data {data.height}x{data.width} "
                f"(expected {expected})"
            )

    @classmethod
    def corpus(cls, config: RunConfig):
        data = config.data
        specs = all_specs(data.num_frames, data.height, data.width)
        train, heldout = split_corpus(specs)
        if data.train_on_heldout:
            train = specs
        return train, heldout

    @classmethod
    def train(cls, config: RunConfig, out_dir: PathLike, resume: Optional[PathLike] = None) -> Trainer:
        """Train on the synthetic corpus; writes checkpoints, ``loss.csv`` and ``report.json`` under ``out_dir``."""
        cls.check_geometry(config)
        out_dir = Path(out_dir)
        train_specs, heldout = cls.corpus(config)
        dataset = training_examples(train_specs)

        if resume is not None:
            trainer = CheckpointService.restore_trainer(CheckpointDAO.load_path(resume), config)
            logger.bind(step=trainer.step).info(f"resumed from {resume}")
        else:
            model, rng = build_model(config.model, config.seed)
            trainer = Trainer(model, config.train, config.optimizer, rng)
        start = trainer.step
        log = logger.bind(command="train", clips=len(dataset), parameters=trainer.model.num_parameters())
        log.info(f"training from step {start} to {config.train.steps}")

        every = config.train.checkpoint_every
        checkpoints = out_dir / "checkpoints"

        def on_step(record: StepRecord) -> None:
            if every and record.step % every == 0:
                CheckpointDAO.save(checkpoints, f"step_{record.step:06d}", CheckpointService.from_trainer(trainer, config))

        records = trainer.fit(dataset, on_step=on_step)
        LossLogDAO.append(out_dir, "loss", records, after_step=start)
        CheckpointDAO.save(out_dir, "final", CheckpointService.from_trainer(trainer, config))

        if config.data.eval_after_train:
            model = StivModel(config.model, RngState(seed=config.seed))
            ema_copy_to(trainer.ema, model)
            report = EvalService.evaluate(model, config, heldout)
            ReportDAO.save(out_dir, "report", report.model_dump(mode="json"))
        return trainer


class SampleService:
    @classmethod
    def condition(
        cls, mode: TaskMode, caption: Sequence[str], images: Sequence[np.ndarray], config: StivConfig
    ) -> Condition:
        pins = list(mode.pinned_frame_indices)
        if len(images) != len(pins):
            raise ConditionException(
                f"{mode.kind.value} needs {len(pins)} condition image(s), got {len(images)}"
            )
        image = None
        if pins:
            latents = codec.encode(np.stack(images))
            expected = (config.latent_height, config.latent_width, config.latent_channels)
            if latents.shape[1:] != expected:
                raise ConditionException(f"condition images encode to {latents.shape[1:]}, model expects {expected}")
            image = ImageCondition(frames=latents, frame_indices=pins)
        text = vocabulary.condition(caption) if caption else None
        return Condition(text=text, image=image)

    @classmethod
    def sample(
        cls,
        model: StivModel,
        kind: TaskKind,
        caption: Sequence[str],
        image_paths: Sequence[PathLike],
        guidance: GuidanceConfig,
        sampler: SamplerConfig,
        out_dir: PathLike,
        num_frames: Optional[int] = None,
    ) -> np.ndarray:
        """Sample one clip and write ``frame_KKKK.ppm`` plus ``latent.npy``; returns the decoded frames."""
        mode = TaskMode(kind=kind, num_frames=num_frames or model.config.latent_frames)
        images = [FrameDAO.load_path(p) for p in image_paths]
        condition = cls.condition(mode, caption, images, model.config)
        latent = euler_sample(model, condition, mode, guidance, sampler)
        frames = codec.decode(latent.data)
        out_dir = Path(out_dir)
        save_video(out_dir, frames)
        np.save(out_dir / "latent.npy", latent.data)
        logger.bind(command="sample", mode=mode.kind.value, seed=sampler.seed).info(f"wrote {len(frames)} frames to {out_dir}")
        return frames

    @classmethod
    def long_video(
        cls,
        model: StivModel,
        caption: Sequence[str],
        keyframes: int,
        segment_frames: int,
        guidance: GuidanceConfig,
        sampler: SamplerConfig,
        out_dir: PathLike,
        keyframe_stride: int = 20,
        dedupe_boundaries: bool = False,
    ) -> np.ndarray:
        """Keyframes first, then one interpolation segment between every consecutive pair.

        Segments are concatenated whole, so K keyframes give (K - 1) * T frames;
        with ``dedupe_boundaries`` the repeated boundary frames are dropped,
        giving (K - 1) * (T - 1) + 1.
        """
        if keyframes < 2:
            raise ConditionException(f"long video needs at least 2 keyframes, got {keyframes}")
        config = model.config
        text = vocabulary.condition(caption) if caption else None
        log = logger.bind(command="long-video", keyframes=keyframes, segment=segment_frames)

        key_mode = TaskMode(kind=TaskKind.KEYFRAME, num_frames=keyframes)
        micro = micro_for_mode(config, key_mode).model_copy(update={"sampling_stride": keyframe_stride})
        key_latent = euler_sample(model, Condition(text=text), key_mode, guidance, sampler, micro=micro)
        # snap keyframes to what their decoded frames encode to, so boundaries match byte for byte
        key_pixels = codec.decode(key_latent.data)
        anchors = codec.encode(key_pixels)
        log.info("sampled keyframes")

        segment_mode = TaskMode(kind=TaskKind.INTERPOLATE, num_frames=segment_frames)
        segments = []
        for i in range(keyframes - 1):
            image = ImageCondition(frames=anchors[i : i + 2], frame_indices=list(segment_mode.pinned_frame_indices))
            seeded = sampler.model_copy(update={"seed": sampler.seed + 1 + i})
            latent = euler_sample(model, Condition(text=text, image=image), segment_mode, guidance, seeded)
            frames = codec.decode(latent.data)
            segments.append(frames[1:] if dedupe_boundaries and i > 0 else frames)
        video = np.concatenate(segments)
        save_video(out_dir, video)
        log.info(f"wrote {len(video)} frames to {out_dir}")
        return video


class SurgeryService:
    @classmethod
    def run(
        cls,
        target: RunConfig,
        out_dir: PathLike,
        from_t2i: Optional[PathLike] = None,
        from_t2v: Optional[PathLike] = None,
        rope_mode: RopeMode = RopeMode.INTERPOLATE,
    ) -> Dict[str, str]:
        """Build the target model from its sources and write ``init.stiv`` plus ``audit.json``.

        With only a T2I source the T2V model is initialised from it; with both
        the temporal weights come from the T2V source; with only a T2V source
        the clip length is extended to the target's ``latent_frames``.
        """
        if from_t2i is not None and from_t2v is not None:
            kind = "t2v+t2i"
            t2v, _ = CheckpointService.load_model(from_t2v)
            t2i, _ = CheckpointService.load_model(from_t2i)
            model, audit = init_from_both(t2v, t2i, target.model, seed=target.seed)
        elif from_t2i is not None:
            kind = "t2i->t2v"
            t2i, _ = CheckpointService.load_model(from_t2i)
            model, audit = init_t2v_from_t2i(t2i, target.model, seed=target.seed)
        elif from_t2v is not None:
            kind = "extend"
            short, _ = CheckpointService.load_model(from_t2v)
            model, audit = extend_frames_init(short, target.model.latent_frames, rope_mode, seed=target.seed)
        else:
            raise SurgeryException("surgery needs --from-t2i and/or --from-t2v")

        mapping = {name: provenance.value for name, provenance in audit.items()}
        CheckpointDAO.save(out_dir, "init", CheckpointService.from_model(model, target, {"surgery": kind}))
        ReportDAO.save(out_dir, "audit", mapping)
        return mapping


class EvalService:
    @classmethod
    def eval_specs(cls, config: RunConfig):
        _, heldout = TrainService.corpus(config)
        return heldout

    @classmethod
    def evaluate(
        cls,
        model: StivModel,
        config: RunConfig,
        specs=None,
        guidance: Optional[GuidanceConfig] = None,
    ) -> EvalReport:
        specs = cls.eval_specs(config) if specs is None else specs
        return eval_suite(
            model,
            specs,
            config.data.eval_modes,
            guidance or config.guidance,
            config.sampler,
            heldout=specs,
            samples_per_spec=config.data.eval_samples_per_spec,
        )

    @classmethod
    def gridsearch(
        cls,
        model: StivModel,
        config: RunConfig,
        scales1: Sequence[float],
        scales2: Sequence[float],
        out_dir: PathLike,
        renorm: bool = False,
    ) -> List[dict]:
        """One eval row per (s1, s2) pair of the SIT grid, written to ``gridsearch.csv``."""
        specs = cls.eval_specs(config)
        rows = []
        for guidance in sit_grid(scales1, scales2, renorm):
            report = eval_suite(
                model,
                specs,
                config.data.eval_modes,
                guidance,
                config.sampler,
                samples_per_spec=config.data.eval_samples_per_spec,
            )
            rows.append({"s1": guidance.s1, "s2": guidance.s2, **report.model_dump(exclude={"heldout_loss"})})
            logger.bind(command="gridsearch", s1=guidance.s1, s2=guidance.s2).info(
                f"direction_accuracy={report.direction_accuracy:.3f}"
            )
        GridDAO.save(out_dir, "gridsearch", rows)
        return rows

