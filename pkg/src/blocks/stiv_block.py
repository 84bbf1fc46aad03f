from ..constants import ModulationSource
from ..tensor import Module, RngState, Tensor
from .layers import Attention, Mlp, Sandwich, cross_attention, spatial_attention, temporal_attention
from .schemas import AttentionConfig, BlockModulation, TokenContext


class StivBlock(Module):
    """Spatial attention, temporal attention, text cross-attention, FFN; each a sandwich residual.

    Spatial attention and FFN read the shared AdaLN modulation. Temporal
    attention uses the fixed identity modulation unless ``temporal_modulation``
    is set. Temporal and cross attention start with a zero output projection,
    so a fresh block is an identity on those paths.
    """

    def __init__(
        self,
        hidden_dim: int,
        n_heads: int,
        text_dim: int,
        rng: RngState,
        ffn_ratio: int = 4,
        temporal: bool = True,
        causal_temporal: bool = False,
        temporal_modulation: bool = False,
    ):
        self.spatial_norm = Sandwich(hidden_dim)
        self.spatial_attn = Attention(AttentionConfig(hidden_dim=hidden_dim, n_heads=n_heads), rng)
        if temporal:
            source = ModulationSource.SHARED_ADALN if temporal_modulation else ModulationSource.FIXED_IDENTITY
            self.temporal_norm = Sandwich(hidden_dim, source)
            self.temporal_attn = Attention(
                AttentionConfig(hidden_dim=hidden_dim, n_heads=n_heads, causal=causal_temporal, zero_out=True),
                rng,
            )
        self.cross_norm = Sandwich(hidden_dim, ModulationSource.FIXED_IDENTITY)
        self.cross_attn = Attention(
            AttentionConfig(hidden_dim=hidden_dim, n_heads=n_heads, context_dim=text_dim, zero_out=True),
            rng,
        )
        self.ffn_norm = Sandwich(hidden_dim)
        self.ffn = Mlp(hidden_dim, ffn_ratio, rng)

    @property
    def has_temporal(self) -> bool:
        return hasattr(self, "temporal_attn")

    def forward(self, x: Tensor, mod: BlockModulation, ctx: TokenContext) -> Tensor:
        x = self.spatial_norm(
            x, lambda h: spatial_attention(h, self.spatial_attn, ctx.spatial_rope, ctx.spatial_positions), mod.spatial
        )
        if self.has_temporal:
            x = self.temporal_norm(
                x,
                lambda h: temporal_attention(h, self.temporal_attn, ctx.temporal_rope, ctx.temporal_positions),
                mod.temporal,
            )
        x = self.cross_norm(x, lambda h: cross_attention(h, self.cross_attn, ctx.text, ctx.text_mask))
        return self.ffn_norm(x, self.ffn, mod.ffn)
