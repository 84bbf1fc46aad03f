from typing import List, Optional, Sequence

import numpy as np

from ..conditioning import TaskMode, image_condition
from ..constants import TaskKind
from ..exceptions import NonFiniteException
from ..flow import GuidanceConfig, SamplerConfig, euler_sample, fm_loss, interpolant, velocity_target
from ..logger import logger
from ..model import Condition, StivModel, codec, condition_batch, vocabulary
from ..tensor import RngState, Tensor, no_grad
from .oracle import motion_oracle
from .render import generate_clip
from .schemas import ClipSpec, EvalReport

HELDOUT_TIMES = (0.25, 0.5, 0.75)


def score_videos(videos: Sequence[np.ndarray], specs: Sequence[ClipSpec]) -> dict:
    """Oracle-judged direction accuracy and motion presence of pixel videos against their specs."""
    verdicts = [motion_oracle(v) for v in videos]
    n = max(len(verdicts), 1)
    return {
        "direction_accuracy": sum(v.direction == s.direction for v, s in zip(verdicts, specs)) / n,
        "motion_presence_rate": sum(not v.is_static for v in verdicts) / n,
    }


def heldout_loss(model: StivModel, specs: Sequence[ClipSpec], seed: int = 0) -> Optional[float]:
    """Mean text-conditioned flow loss over held-out clips at fixed times."""
    if not specs:
        return None
    rng = RngState(seed=seed)
    losses = []
    with no_grad():
        for spec in specs:
            clip = generate_clip(spec)
            x1 = codec.encode(clip.pixels)[None]
            condition = Condition(text=vocabulary.condition(clip.tokens))
            batch = condition_batch([condition], [clip.micro], spec.num_frames)
            for t in HELDOUT_TIMES:
                eps = rng.generator().standard_normal(x1.shape)
                pred = model(Tensor(interpolant(x1, eps, t)), np.array([t]), batch)
                target = velocity_target(x1, eps).astype(pred.dtype)
                losses.append(fm_loss(pred, target, np.ones(x1.shape[:2], dtype=bool)).item())
    return float(np.mean(losses))


def eval_suite(
    model: StivModel,
    specs: Sequence[ClipSpec],
    modes: Sequence[TaskKind],
    guidance: GuidanceConfig,
    sampler: SamplerConfig,
    heldout: Sequence[ClipSpec] = (),
    samples_per_spec: int = 1,
) -> EvalReport:
    """Sample every spec under every mode and judge the decoded videos with the motion oracle.

    Samples run one after another with seeds ``sampler.seed + index * samples_per_spec + k``;
    STIV_THREADS parallelism applies inside each sample, across its guidance branches.
    """
    videos: List[np.ndarray] = []
    judged: List[ClipSpec] = []
    exact, exact_total, failures, total = 0, 0, 0, 0
    for kind in modes:
        for index, spec in enumerate(specs):
            clip = generate_clip(spec)
            latent = codec.encode(clip.pixels)
            mode = TaskMode(kind=kind, num_frames=spec.num_frames)
            condition = Condition(text=vocabulary.condition(clip.tokens), image=image_condition(latent, mode))
            for k in range(samples_per_spec):
                total += 1
                seeded = sampler.model_copy(update={"seed": sampler.seed + index * samples_per_spec + k})
                try:
                    sample = euler_sample(model, condition, mode, guidance, seeded)
                except NonFiniteException:
                    failures += 1
                    continue
                video = codec.decode(sample.data)
                if mode.has_pins:
                    exact_total += 1
                    pins = list(mode.pinned_frame_indices)
                    exact += int(np.array_equal(video[pins], clip.pixels[pins]))
                videos.append(video)
                judged.append(spec)

    scores = score_videos(videos, judged)
    report = EvalReport(
        n_samples=total,
        first_frame_exact_rate=exact / exact_total if exact_total else None,
        direction_accuracy=scores["direction_accuracy"],
        motion_presence_rate=scores["motion_presence_rate"],
        heldout_loss=heldout_loss(model, heldout, sampler.seed),
        nan_free_rate=(total - failures) / max(total, 1),
    )
    logger.bind(samples=total).info(report.model_dump_json())
    return report
