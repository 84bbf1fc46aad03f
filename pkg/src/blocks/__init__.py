from .functional import rms_norm, rope_apply, sandwich, stateless_layer_norm
from .layers import (
    Attention,
    Mlp,
    Sandwich,
    attention_mask,
    cross_attention,
    spatial_attention,
    temporal_attention,
)
from .schemas import AttentionConfig, BlockModulation, Modulation, RopeTable, TokenContext
from .stiv_block import StivBlock
