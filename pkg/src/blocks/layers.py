from typing import Callable, Optional

import numpy as np

from ..constants import NORM_EPS, ModulationSource
from ..tensor import Linear, Module, RngState, Tensor, ops, parameter
from .functional import rms_norm, rope_apply, sandwich
from .schemas import AttentionConfig, Modulation, RopeTable


class Attention(Module):
    def __init__(self, config: AttentionConfig, rng: RngState):
        self.config = config
        dim, context_dim = config.hidden_dim, config.context_dim or config.hidden_dim
        self.q_proj = Linear(dim, dim, rng)
        self.k_proj = Linear(context_dim, dim, rng)
        self.v_proj = Linear(context_dim, dim, rng)
        self.out_proj = Linear(dim, dim, rng, zero_init=config.zero_out)
        if config.qk_norm:
            self.q_gain = parameter(np.ones((config.n_heads, config.head_dim)))
            self.k_gain = parameter(np.ones((config.n_heads, config.head_dim)))

    def _heads(self, x: Tensor) -> Tensor:
        n, length, _ = x.shape
        return x.reshape(n, length, self.config.n_heads, self.config.head_dim).transpose(0, 2, 1, 3)

    def forward(
        self,
        x: Tensor,
        context: Optional[Tensor] = None,
        rope: Optional[RopeTable] = None,
        positions: Optional[np.ndarray] = None,
        key_mask: Optional[np.ndarray] = None,
    ) -> Tensor:
        """x: [N, L, D]; context: [N, M, Dc] (defaults to x); key_mask: [N, M]."""
        n, length, dim = x.shape
        source = x if context is None else context
        q = self._heads(self.q_proj(x))
        k = self._heads(self.k_proj(source))
        v = self._heads(self.v_proj(source))
        if self.config.qk_norm:
            heads, head_dim = self.config.n_heads, self.config.head_dim
            q = rms_norm(q, self.q_gain.reshape(heads, 1, head_dim))
            k = rms_norm(k, self.k_gain.reshape(heads, 1, head_dim))
        if rope is not None:
            q = rope_apply(q, rope, positions)
            k = rope_apply(k, rope, positions)
        logits = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(self.config.head_dim))
        allowed = attention_mask(length, source.shape[1], self.config.causal, key_mask)
        weights = ops.softmax(logits, axis=-1, mask=allowed)
        out = (weights @ v).transpose(0, 2, 1, 3).reshape(n, length, dim)
        return self.out_proj(out)


def attention_mask(
    n_queries: int, n_keys: int, causal: bool, key_mask: Optional[np.ndarray]
) -> Optional[np.ndarray]:
    """Boolean mask broadcastable to [N, H, L, M]; True where attention is allowed."""
    mask = None
    if causal:
        mask = np.tril(np.ones((n_queries, n_keys), dtype=bool))
    if key_mask is not None:
        keys = np.asarray(key_mask, dtype=bool)[:, None, None, :]
        mask = keys if mask is None else mask & keys
    return mask


class Mlp(Module):
    def __init__(self, dim: int, ratio: int, rng: RngState):
        self.fc1 = Linear(dim, dim * ratio, rng)
        self.fc2 = Linear(dim * ratio, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(x)))


class Sandwich(Module):
    """Gains of a sandwich-normed residual sublayer."""

    def __init__(self, dim: int, modulation: ModulationSource = ModulationSource.SHARED_ADALN):
        self.modulation = modulation
        self.pre_gain = parameter(np.ones(dim))
        self.post_gain = parameter(np.ones(dim))

    def forward(self, x: Tensor, inner: Callable[[Tensor], Tensor], mod: Optional[Modulation] = None) -> Tensor:
        if self.modulation == ModulationSource.FIXED_IDENTITY or mod is None:
            mod = Modulation.identity()
        return sandwich(x, inner, self.pre_gain, self.post_gain, mod, NORM_EPS)


def spatial_attention(tokens: Tensor, attn: Attention, rope: RopeTable, positions: np.ndarray) -> Tensor:
    """Self-attention within each frame: [B, T, S, D] folded to [B*T, S, D]."""
    b, t, s, d = tokens.shape
    out = attn(tokens.reshape(b * t, s, d), rope=rope, positions=positions)
    return out.reshape(b, t, s, d)


def temporal_attention(tokens: Tensor, attn: Attention, rope: RopeTable, positions: np.ndarray) -> Tensor:
    """Self-attention across frames at each site: [B, T, S, D] folded to [B*S, T, D]."""
    b, t, s, d = tokens.shape
    folded = tokens.transpose(0, 2, 1, 3).reshape(b * s, t, d)
    out = attn(folded, rope=rope, positions=positions)
    return out.reshape(b, s, t, d).transpose(0, 2, 1, 3)


def cross_attention(tokens: Tensor, attn: Attention, text: Tensor, text_mask: Optional[np.ndarray] = None) -> Tensor:
    """Queries from every token of a clip, keys/values from its caption sequence."""
    b, t, s, d = tokens.shape
    out = attn(tokens.reshape(b, t * s, d), context=text, key_mask=text_mask)
    return out.reshape(b, t, s, d)
