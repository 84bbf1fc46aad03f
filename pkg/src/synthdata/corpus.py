import hashlib
from itertools import product
from pathlib import Path
from typing import List, Sequence, Tuple

from tqdm import tqdm

from ..config import settings
from ..constants import COLORS, DIRECTIONS, SHAPES
from ..logger import logger
from ..model import Condition, VideoLatent, codec, vocabulary
from ..training import TrainingExample
from .dao import CaptionDAO, load_video, save_video
from .render import generate_clip
from .schemas import ClipSpec

CORPUS_SPEEDS = (1, 2)
HELDOUT_MODULUS = 8


def all_specs(num_frames: int = 8, height: int = 32, width: int = 32) -> List[ClipSpec]:
    """Every (shape, color, direction, speed) combination, in a fixed order."""
    return [
        ClipSpec(shape=s, color=c, direction=d, speed=v, num_frames=num_frames, height=height, width=width)
        for s, c, d, v in product(SHAPES, COLORS, DIRECTIONS, CORPUS_SPEEDS)
    ]


def is_heldout(spec: ClipSpec) -> bool:
    digest = hashlib.sha256(spec.key.encode("utf-8")).hexdigest()
    return int(digest, 16) % HELDOUT_MODULUS == 0


def split_corpus(specs: Sequence[ClipSpec]) -> Tuple[List[ClipSpec], List[ClipSpec]]:
    train = [s for s in specs if not is_heldout(s)]
    heldout = [s for s in specs if is_heldout(s)]
    return train, heldout


def training_example(spec: ClipSpec) -> TrainingExample:
    clip = generate_clip(spec)
    latent = VideoLatent(data=codec.encode(clip.pixels), micro=clip.micro)
    return TrainingExample(latent=latent, condition=Condition(text=vocabulary.condition(clip.tokens)))


def training_examples(specs: Sequence[ClipSpec]) -> List[TrainingExample]:
    return [training_example(spec) for spec in specs]


def export_corpus(out_dir, specs: Sequence[ClipSpec]) -> List[Path]:
    """Write clip_NNN/frame_KKKK.ppm and clip_NNN/caption.txt for every spec."""
    out_dir = Path(out_dir)
    written = []
    for index, spec in enumerate(tqdm(specs, desc="export", disable=not settings.PROGRESS_BARS)):
        clip = generate_clip(spec)
        clip_dir = out_dir / f"clip_{index:03d}"
        save_video(clip_dir, clip.pixels)
        CaptionDAO.save(clip_dir, "caption", clip.tokens)
        written.append(clip_dir)
    logger.bind(clips=len(written)).info(f"exported corpus to {out_dir}")
    return written


def import_clip(clip_dir) -> Tuple:
    """(pixels [T, H, W, 3], caption tokens) of one exported clip directory."""
    return load_video(clip_dir), CaptionDAO.load(clip_dir, "caption")
