"""The STIV network: cubify, singleton conditioning, masked block stack, velocity head."""
from typing import Optional, Tuple

import numpy as np

from ..blocks import BlockModulation, RopeTable, StivBlock, TokenContext, stateless_layer_norm
from ..constants import RopeKind
from ..exceptions import ShapeMismatchException
from ..logger import logger
from ..tensor import Linear, Module, RngState, Tensor, no_grad, ops, parameter
from .embedders import SharedAdaLN, SingletonConditioner
from .masking import MaskIndexSet, mask_tokens, unmask_tokens
from .schemas import Condition, ConditionBatch, StivConfig, VideoLatent
from .text import TextEncoder, vocabulary


def patchify(x: Tensor, spatial_patch: int, temporal_patch: int) -> Tensor:
    """[B, T, H, W, C] -> [B, T/pt, (H/ps)(W/ps), pt*ps*ps*C], patch features ordered (pt, ps, ps, C)."""
    b, t, h, w, c = x.shape
    ps, pt = spatial_patch, temporal_patch
    if t % pt or h % ps or w % ps:
        raise ShapeMismatchException("patchify", x.shape, (pt, ps, ps))
    x = x.reshape(b, t // pt, pt, h // ps, ps, w // ps, ps, c)
    x = x.transpose(0, 1, 3, 5, 2, 4, 6, 7)
    return x.reshape(b, t // pt, (h // ps) * (w // ps), pt * ps * ps * c)


def unpatchify(tokens: Tensor, spatial_patch: int, temporal_patch: int, grid: Tuple[int, int], channels: int) -> Tensor:
    b, tt, _, _ = tokens.shape
    ps, pt = spatial_patch, temporal_patch
    gh, gw = grid
    x = tokens.reshape(b, tt, gh, gw, pt, ps, ps, channels)
    x = x.transpose(0, 1, 4, 2, 5, 3, 6, 7)
    return x.reshape(b, tt * pt, gh * ps, gw * ps, channels)


def spatial_grid(grid: Tuple[int, int]) -> np.ndarray:
    rows, cols = np.meshgrid(np.arange(grid[0]), np.arange(grid[1]), indexing="ij")
    return np.stack([rows.reshape(-1), cols.reshape(-1)], axis=-1).astype(np.float64)


class StivModel(Module):
    def __init__(self, config: StivConfig, rng: RngState):
        self.config = config
        d = config.hidden_dim
        self.cubify = Linear(config.patch_dim, d, rng)
        self.text_encoder = TextEncoder(config.vocab_size, config.text_dim, rng)
        self.conditioner = SingletonConditioner(config.frequency_dim, d, config.text_dim, rng)
        self.adaln = SharedAdaLN(d, config.modulation_chunks, rng)
        self.pinned_embed = parameter(np.zeros(d))
        self.blocks = [self._block(rng) for _ in range(config.n_blocks)]
        self.mask_token = parameter(np.zeros(d))
        self.decoder_blocks = [self._block(rng) for _ in range(config.n_decoder_blocks)]
        self.head = Linear(d, config.patch_dim, rng, zero_init=True)

    def _block(self, rng: RngState) -> StivBlock:
        c = self.config
        return StivBlock(
            c.hidden_dim,
            c.n_heads,
            c.text_dim,
            rng,
            ffn_ratio=c.ffn_ratio,
            temporal=c.temporal_attention,
            causal_temporal=c.causal_temporal,
            temporal_modulation=c.temporal_modulation,
        )

    def rope_tables(self) -> Tuple[RopeTable, RopeTable]:
        c = self.config
        spatial = RopeTable(
            kind=RopeKind.SPATIAL_2D, head_dim=c.head_dim, base=c.rope_base, position_scale=c.spatial_rope_scale
        )
        temporal = RopeTable(
            kind=RopeKind.TEMPORAL_1D, head_dim=c.head_dim, base=c.rope_base, position_scale=c.temporal_rope_scale
        )
        return spatial, temporal

    def _check_input(self, x: Tensor, t: np.ndarray, batch: ConditionBatch) -> None:
        c = self.config
        if x.ndim != 5 or x.shape[-1] != c.latent_channels:
            raise ShapeMismatchException("forward", x.shape, ("B", "T", "H", "W", c.latent_channels))
        if x.shape[2] % c.spatial_patch or x.shape[3] % c.spatial_patch:
            raise ShapeMismatchException("forward", x.shape[2:4], (c.spatial_patch, c.spatial_patch))
        b, frames = x.shape[0], x.shape[1]
        if t.shape != (b,) or batch.size != b or batch.pinned.shape != (b, frames):
            raise ShapeMismatchException("forward", x.shape, t.shape, batch.text_ids.shape, batch.pinned.shape)

    def _pad_frames(self, x: Tensor, pinned: np.ndarray) -> Tuple[Tensor, np.ndarray]:
        """Repeat the last frame until T divides by the temporal patch."""
        frames = x.shape[1]
        pad = -frames % self.config.temporal_patch
        if not pad:
            return x, pinned
        repeat = np.full(pad, frames - 1)
        x = ops.concat([x, ops.take(x, repeat, axis=1)], axis=1)
        return x, np.concatenate([pinned, pinned[:, repeat]], axis=1)

    def embed(self, x: Tensor, pinned: np.ndarray) -> Tensor:
        """Cubify a padded latent and label the temporal slots holding pinned frames."""
        c = self.config
        tokens = self.cubify(patchify(x, c.spatial_patch, c.temporal_patch))
        b, slots = tokens.shape[0], tokens.shape[1]
        slot_pinned = pinned.reshape(b, slots, c.temporal_patch).any(axis=-1)
        label = Tensor(slot_pinned[:, :, None, None], dtype=tokens.dtype)
        return tokens + label * self.pinned_embed

    def modulation(self, t: np.ndarray, batch: ConditionBatch) -> Tuple[BlockModulation, Tensor]:
        text, pooled = self.text_encoder(batch.text_ids, batch.text_mask)
        condition = self.conditioner(t, batch.micro, pooled)
        return self.adaln(condition), text

    def forward(
        self,
        x_t: Tensor,
        t: np.ndarray,
        batch: ConditionBatch,
        mask_rng: Optional[RngState] = None,
        mask_ratio: Optional[float] = None,
    ) -> Tensor:
        """Velocity for a latent batch ``x_t`` of shape [B, T, H, W, C] at times ``t`` of shape [B].

        Token masking only runs when ``mask_rng`` is given.
        """
        c = self.config
        t = np.asarray(t, dtype=np.float64).reshape(-1)
        self._check_input(x_t, t, batch)
        frames = x_t.shape[1]
        x, pinned = self._pad_frames(x_t, np.asarray(batch.pinned, dtype=bool))
        tokens = self.embed(x, pinned)
        mod, text = self.modulation(t, batch)

        grid = (x.shape[2] // c.spatial_patch, x.shape[3] // c.spatial_patch)
        spatial_rope, temporal_rope = self.rope_tables()
        full = TokenContext(
            spatial_positions=spatial_grid(grid),
            temporal_positions=np.arange(tokens.shape[1], dtype=np.float64),
            spatial_rope=spatial_rope,
            temporal_rope=temporal_rope,
            text=text,
            text_mask=batch.text_mask,
        )

        ratio = c.mask_ratio if mask_ratio is None else mask_ratio
        index_set: Optional[MaskIndexSet] = None
        ctx = full
        if mask_rng is not None:
            tokens, index_set = mask_tokens(tokens, ratio, c.mask_axis, mask_rng)
            ctx = self._kept_context(full, index_set)

        for block in self.blocks:
            tokens = block(tokens, mod, ctx)
        if index_set is not None:
            tokens = unmask_tokens(tokens, index_set, self.mask_token)
        for block in self.decoder_blocks:
            tokens = block(tokens, mod, full)

        patches = self.head(stateless_layer_norm(tokens, c.norm_eps))
        velocity = unpatchify(patches, c.spatial_patch, c.temporal_patch, grid, c.latent_channels)
        if velocity.shape[1] != frames:
            velocity = ops.take(velocity, np.arange(frames), axis=1)
        return velocity

    @staticmethod
    def _kept_context(full: TokenContext, index_set: MaskIndexSet) -> TokenContext:
        if index_set.is_empty:
            return full
        if index_set.axis == "spatial":
            return full.model_copy(update={"spatial_positions": full.spatial_positions[index_set.kept]})
        return full.model_copy(update={"temporal_positions": full.temporal_positions[index_set.kept]})

    def velocity(self, latent: VideoLatent, t: float, condition: Condition) -> np.ndarray:
        """Single-clip inference: F(x_t, c_T, c_I, t) as an array shaped like ``latent.data``."""
        batch = condition_batch([condition], [latent.micro], latent.num_frames)
        x = Tensor(latent.data[None])
        with no_grad():
            out = self.forward(x, np.array([t]), batch)
        return out.data[0]


def condition_batch(conditions, micro, num_frames: int) -> ConditionBatch:
    """Collate conditions; a frame is flagged pinned when the condition carries its image."""
    pinned = np.zeros((len(conditions), num_frames), dtype=bool)
    texts = []
    for i, condition in enumerate(conditions):
        texts.append(None if condition.text_dropped else condition.text)
        if condition.image is not None and not condition.image_dropped:
            pinned[i, condition.image.frame_indices] = True
    return ConditionBatch.collate(texts, micro, pinned, vocabulary.null_id, vocabulary.pad_id)


def build_model(config: StivConfig, seed: int) -> Tuple[StivModel, RngState]:
    rng = RngState(seed=seed)
    model = StivModel(config, rng)
    logger.bind(parameters=model.num_parameters()).debug("built model")
    return model, rng
