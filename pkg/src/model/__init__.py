from . import codec
from .embedders import ScalarEmbedder, SharedAdaLN, SingletonConditioner, sinusoidal
from .masking import MaskIndexSet, kept_count, mask_tokens, unmask_tokens
from .model import StivModel, build_model, condition_batch, patchify, spatial_grid, unpatchify
from .schemas import (
    Condition,
    ConditionBatch,
    ImageCondition,
    MicroConditions,
    StivConfig,
    TextCondition,
    VideoLatent,
)
from .service import count_block_parameters, count_parameters, preset_report
from .text import TextEncoder, Vocabulary, vocabulary
