from typing import Optional

import numpy as np
import pytest
from pydantic import ValidationError

from src.blocks import (
    Attention,
    AttentionConfig,
    BlockModulation,
    Modulation,
    RopeTable,
    Sandwich,
    StivBlock,
    TokenContext,
    cross_attention,
    rms_norm,
    rope_apply,
    spatial_attention,
    stateless_layer_norm,
    temporal_attention,
)
from src.constants import RopeKind
from src.exceptions import RopeTableException
from src.model import spatial_grid
from src.tensor import RngState, Tensor, default_dtype, grad, parameter

from .utils import check_gradient, promote, randomize

D, HEADS, TEXT_DIM = 16, 2, 8


def _context(frames: int = 3, grid=(2, 2), text_len: int = 4, seed: int = 0) -> TokenContext:
    generator = np.random.default_rng(seed)
    mask = np.ones((2, text_len), dtype=bool)
    mask[1, 2:] = False
    return TokenContext(
        spatial_positions=spatial_grid(grid),
        temporal_positions=np.arange(frames, dtype=np.float64),
        spatial_rope=RopeTable(kind=RopeKind.SPATIAL_2D, head_dim=D // HEADS),
        temporal_rope=RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=D // HEADS),
        text=Tensor(generator.standard_normal((2, text_len, TEXT_DIM))),
        text_mask=mask,
    )


def _tokens(seed: int, frames: int = 3, sites: int = 4) -> Tensor:
    return parameter(np.random.default_rng(seed).standard_normal((2, frames, sites, D)))


def _modulation(seed: int, gate: Optional[float] = None) -> BlockModulation:
    generator = np.random.default_rng(seed)

    def triple():
        shift, scale, g = (generator.standard_normal((2, 1, 1, D)) * 0.3 for _ in range(3))
        return Modulation(
            shift=Tensor(shift), scale=Tensor(1.0 + scale), gate=Tensor(g if gate is None else np.full_like(g, gate))
        )

    return BlockModulation(spatial=triple(), ffn=triple(), temporal=triple())


def test_rope_table_rejects_unsplittable_head_dims():
    with pytest.raises(ValidationError):
        RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=7)
    with pytest.raises(ValidationError):
        RopeTable(kind=RopeKind.SPATIAL_2D, head_dim=6)


def test_rope_apply_checks_head_dim_and_positions(float64):
    table = RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=8)
    with pytest.raises(RopeTableException):
        rope_apply(Tensor(np.ones((1, 3, 4))), table, np.arange(3))
    with pytest.raises(RopeTableException):
        rope_apply(Tensor(np.ones((1, 3, 8))), table, np.arange(5))


def test_rope_apply_honours_max_positions(float64):
    table = RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=8, max_positions=(4,))
    rope_apply(Tensor(np.ones((1, 4, 8))), table, np.arange(4))
    with pytest.raises(RopeTableException):
        rope_apply(Tensor(np.ones((1, 5, 8))), table, np.arange(5))
    grid = RopeTable(kind=RopeKind.SPATIAL_2D, head_dim=8, max_positions=(2, 8))
    rope_apply(Tensor(np.ones((1, 6, 8))), grid, spatial_grid((2, 3)))
    with pytest.raises(RopeTableException):
        rope_apply(Tensor(np.ones((1, 6, 8))), grid, spatial_grid((3, 2)))


def test_temporal_rope_logits_depend_only_on_offset(float64):
    table = RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=8)
    generator = np.random.default_rng(0)
    q, k = generator.standard_normal(8), generator.standard_normal(8)

    def logit(m, n):
        qm = rope_apply(Tensor(q[None, None]), table, np.array([m])).data[0, 0]
        kn = rope_apply(Tensor(k[None, None]), table, np.array([n])).data[0, 0]
        return qm @ kn

    assert logit(5, 2) == pytest.approx(logit(13, 10), abs=1e-12)
    assert logit(0, 0) == pytest.approx(q @ k, abs=1e-12)


def test_spatial_rope_is_translation_invariant_per_axis(float64):
    table = RopeTable(kind=RopeKind.SPATIAL_2D, head_dim=8)
    generator = np.random.default_rng(1)
    q, k = generator.standard_normal(8), generator.standard_normal(8)

    def logit(pq, pk):
        qm = rope_apply(Tensor(q[None, None]), table, np.array([pq], dtype=float)).data[0, 0]
        kn = rope_apply(Tensor(k[None, None]), table, np.array([pk], dtype=float)).data[0, 0]
        return qm @ kn

    assert logit((1, 2), (0, 0)) == pytest.approx(logit((4, 7), (3, 5)), abs=1e-12)
    assert logit((1, 0), (0, 0)) != pytest.approx(logit((0, 1), (0, 0)), abs=1e-6)


def test_position_scale_interpolates_positions(float64):
    half = RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=8, position_scale=0.5)
    unit = RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=8)
    np.testing.assert_allclose(half.angles(np.arange(0, 8, 2)), unit.angles(np.arange(4)), atol=1e-12)


def test_zero_gate_sandwich_is_exact_identity(float64):
    x = Tensor(np.random.default_rng(0).standard_normal((2, 3, 4, D)))
    sandwich = Sandwich(D)
    mod = Modulation(shift=0.3, scale=2.0, gate=0.0)
    out = sandwich(x, lambda h: h * 5.0 + 1.0, mod)
    np.testing.assert_array_equal(out.data, x.data)


def test_fresh_block_with_closed_gates_is_identity(float64):
    block = StivBlock(D, HEADS, TEXT_DIM, RngState(seed=0))
    x = _tokens(0)
    out = block(x, _modulation(1, gate=0.0), _context())
    np.testing.assert_array_equal(out.data, x.data)


def test_causal_temporal_attention_ignores_future_frames(float64):
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS, causal=True), RngState(seed=0)), 3)
    ctx = _context(frames=4)
    x = np.random.default_rng(2).standard_normal((1, 4, 2, D))
    changed = x.copy()
    changed[:, 2:] += 1.0
    a = temporal_attention(Tensor(x), attn, ctx.temporal_rope, ctx.temporal_positions).data
    b = temporal_attention(Tensor(changed), attn, ctx.temporal_rope, ctx.temporal_positions).data
    np.testing.assert_allclose(a[:, :2], b[:, :2], atol=1e-12)
    assert not np.allclose(a[:, 2:], b[:, 2:])


def test_padded_text_tokens_do_not_change_cross_attention(float64):
    attn = randomize(
        Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS, context_dim=TEXT_DIM), RngState(seed=0)), 4
    )
    ctx = _context()
    x = Tensor(np.random.default_rng(3).standard_normal((2, 3, 4, D)))
    text = ctx.text.data.copy()
    text[1, 2:] = 99.0
    a = cross_attention(x, attn, ctx.text, ctx.text_mask).data
    b = cross_attention(x, attn, Tensor(text), ctx.text_mask).data
    np.testing.assert_allclose(a[1], b[1], atol=1e-12)


def _sublayer(kind: str, seed: int):
    """(parameters, loss of tokens) for one sublayer type with random weights."""
    rng = RngState(seed=seed)
    ctx = _context(seed=seed)
    weights = np.random.default_rng(seed + 7).standard_normal((2, 3, 4, D))
    if kind in ("block", "ffn"):
        block = randomize(StivBlock(D, HEADS, TEXT_DIM, rng, temporal_modulation=True), seed)
        mod = _modulation(seed)
        if kind == "block":
            return block.parameters(), lambda x: (block(x, mod, ctx) * weights).sum()
        params = block.ffn_norm.parameters() + block.ffn.parameters()
        return params, lambda x: (block.ffn_norm(x, block.ffn, mod.ffn) * weights).sum()
    context_dim = TEXT_DIM if kind == "cross" else None
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS, context_dim=context_dim), rng), seed)
    if kind == "spatial":
        inner = lambda x: spatial_attention(x, attn, ctx.spatial_rope, ctx.spatial_positions)  # noqa: E731
    elif kind == "temporal":
        inner = lambda x: temporal_attention(x, attn, ctx.temporal_rope, ctx.temporal_positions)  # noqa: E731
    else:
        inner = lambda x: cross_attention(x, attn, ctx.text, ctx.text_mask)  # noqa: E731
    return attn.parameters(), lambda x: (inner(x) * weights).sum()


@pytest.mark.parametrize("kind", ["spatial", "temporal", "cross", "ffn", "block"])
@pytest.mark.parametrize("seed", range(5))
def test_sublayer_gradients_match_finite_differences(float64, kind, seed):
    params, loss_of = _sublayer(kind, seed)
    params = params[:: max(1, len(params) // 6)]
    x = _tokens(seed + 11)
    grads = grad(loss_of(x), [x] + params)
    assert check_gradient(lambda: loss_of(x), x, grads[0].data, seed=seed) < 1e-6
    for p, g in zip(params, grads[1:]):
        assert check_gradient(lambda: loss_of(x), p, g.data, seed=seed, n_entries=3) < 1e-6


@pytest.mark.parametrize("kind", ["spatial", "temporal", "cross", "ffn", "block"])
@pytest.mark.parametrize("seed", range(5))
def test_sublayer_gradients_hold_in_float32(kind, seed):
    with default_dtype(np.float32):
        all_params, loss_of = _sublayer(kind, seed)
        params = all_params[:: max(1, len(all_params) // 6)]
        x = _tokens(seed + 11)
        grads = grad(loss_of(x), [x] + params)
    assert all(g.dtype == np.float32 for g in grads)
    promote(all_params + [x])
    with default_dtype(np.float64):
        assert check_gradient(lambda: loss_of(x), x, grads[0].data, seed=seed) < 1e-3
        for p, g in zip(params, grads[1:]):
            assert check_gradient(lambda: loss_of(x), p, g.data, seed=seed, n_entries=3) < 1e-3


def test_rms_norm_of_zero_and_constant_vectors(float64):
    gain = Tensor(np.ones(4))
    np.testing.assert_array_equal(rms_norm(Tensor(np.zeros(4)), gain).data, 0.0)
    out = rms_norm(Tensor(np.full(4, -3.0)), gain).data
    np.testing.assert_allclose(out, -1.0 / np.sqrt(1.0 + 1e-6 / 9.0), rtol=1e-12)
    x = np.random.default_rng(0).standard_normal((5, 16))
    y = rms_norm(Tensor(x), Tensor(np.full(16, 2.0))).data / 2.0
    np.testing.assert_allclose((y ** 2).sum(axis=-1), 16.0, atol=1e-4)


def test_stateless_layer_norm_examples(float64):
    np.testing.assert_array_equal(stateless_layer_norm(Tensor([1.0, 1.0])).data, [0.0, 0.0])
    np.testing.assert_allclose(stateless_layer_norm(Tensor([0.0, 2.0])).data, [-1.0, 1.0], atol=1e-6)
    y = stateless_layer_norm(Tensor(np.random.default_rng(1).standard_normal((6, 64)) * 3.0 + 2.0)).data
    np.testing.assert_allclose(y.mean(axis=-1), 0.0, atol=1e-6)
    np.testing.assert_allclose(y.var(axis=-1), 1.0, atol=1e-5)


@pytest.mark.parametrize("kind", [RopeKind.TEMPORAL_1D, RopeKind.SPATIAL_2D])
def test_rope_is_a_norm_preserving_rotation(float64, kind):
    table = RopeTable(kind=kind, head_dim=8)
    positions = spatial_grid((3, 4)) if kind == RopeKind.SPATIAL_2D else np.arange(12) * 3.0
    v = np.random.default_rng(2).standard_normal((2, 12, 8))
    out = rope_apply(Tensor(v), table, positions).data
    np.testing.assert_allclose(np.linalg.norm(out, axis=-1), np.linalg.norm(v, axis=-1), rtol=1e-12)
    np.testing.assert_allclose(out[:, 0], v[:, 0], atol=1e-15)


def _rotate(x: np.ndarray, angles: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    cos, sin = np.cos(angles), np.sin(angles)
    out[..., 0::2] = x[..., 0::2] * cos - x[..., 1::2] * sin
    out[..., 1::2] = x[..., 0::2] * sin + x[..., 1::2] * cos
    return out


def _attention_loop(attn: Attention, x: np.ndarray, table: RopeTable, positions: np.ndarray) -> np.ndarray:
    """One head at a time, written out with plain numpy."""
    c = attn.config
    hd = c.head_dim

    def project(layer, value):
        return value @ layer.weight.data + layer.bias.data

    def normed(value, gain):
        return value / np.sqrt((value ** 2).mean(axis=-1, keepdims=True) + 1e-6) * gain

    q_all, k_all, v_all = project(attn.q_proj, x), project(attn.k_proj, x), project(attn.v_proj, x)
    angles = table.angles(positions)
    out = np.zeros_like(q_all)
    for n in range(x.shape[0]):
        for h in range(c.n_heads):
            cols = slice(h * hd, (h + 1) * hd)
            q = _rotate(normed(q_all[n][:, cols], attn.q_gain.data[h]), angles)
            k = _rotate(normed(k_all[n][:, cols], attn.k_gain.data[h]), angles)
            logits = q @ k.T / np.sqrt(hd)
            w = np.exp(logits - logits.max(axis=-1, keepdims=True))
            out[n][:, cols] = (w / w.sum(axis=-1, keepdims=True)) @ v_all[n][:, cols]
    return project(attn.out_proj, out)


def test_attention_matches_a_per_head_loop(float64):
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), RngState(seed=0)), 5)
    table = RopeTable(kind=RopeKind.TEMPORAL_1D, head_dim=D // HEADS)
    x = np.random.default_rng(4).standard_normal((3, 4, D))
    out = attn(Tensor(x), rope=table, positions=np.arange(4.0)).data
    np.testing.assert_allclose(out, _attention_loop(attn, x, table, np.arange(4.0)), atol=1e-10)


def test_single_token_attention_is_the_value_path(float64):
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), RngState(seed=0)), 6)
    x = np.random.default_rng(5).standard_normal((2, 1, 3, D))
    expected = attn.out_proj(attn.v_proj(Tensor(x))).data
    ctx = _context(frames=1)
    out = temporal_attention(Tensor(x), attn, ctx.temporal_rope, ctx.temporal_positions).data
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_spatial_attention_on_one_frame_is_image_attention(float64):
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), RngState(seed=0)), 7)
    ctx = _context(frames=1)
    x = np.random.default_rng(6).standard_normal((2, 1, 4, D))
    video = spatial_attention(Tensor(x), attn, ctx.spatial_rope, ctx.spatial_positions).data
    image = attn(Tensor(x[:, 0]), rope=ctx.spatial_rope, positions=ctx.spatial_positions).data
    np.testing.assert_allclose(video[:, 0], image, atol=1e-12)


def test_spatial_attention_keeps_frames_apart(float64):
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), RngState(seed=0)), 8)
    ctx = _context()
    a = np.random.default_rng(7).standard_normal((1, 3, 4, D))
    b = a.copy()
    b[:, [0, 2]] = np.random.default_rng(8).standard_normal((1, 2, 4, D))
    out_a = spatial_attention(Tensor(a), attn, ctx.spatial_rope, ctx.spatial_positions).data
    out_b = spatial_attention(Tensor(b), attn, ctx.spatial_rope, ctx.spatial_positions).data
    np.testing.assert_allclose(out_a[:, 1], out_b[:, 1], atol=1e-12)


def test_temporal_attention_keeps_sites_apart(float64):
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), RngState(seed=0)), 9)
    ctx = _context()
    a = np.random.default_rng(9).standard_normal((1, 3, 4, D))
    b = a.copy()
    b[:, :, [0, 1, 3]] = np.random.default_rng(10).standard_normal((1, 3, 3, D))
    out_a = temporal_attention(Tensor(a), attn, ctx.temporal_rope, ctx.temporal_positions).data
    out_b = temporal_attention(Tensor(b), attn, ctx.temporal_rope, ctx.temporal_positions).data
    np.testing.assert_allclose(out_a[:, :, 2], out_b[:, :, 2], atol=1e-12)


def test_factorized_attention_never_moves_information_diagonally(float64):
    """One spatial and one temporal pass over the same tokens reach only the frame and the site of a change."""
    rng = RngState(seed=0)
    spatial = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), rng), 11)
    temporal = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), rng), 12)
    ctx = _context()

    def pair(x):
        tokens = Tensor(x)
        s = spatial_attention(tokens, spatial, ctx.spatial_rope, ctx.spatial_positions)
        t = temporal_attention(tokens, temporal, ctx.temporal_rope, ctx.temporal_positions)
        return (s + t).data

    x = np.random.default_rng(11).standard_normal((1, 3, 4, D))
    moved = x.copy()
    moved[0, 1, 2] += 1.0
    changed = np.abs(pair(moved) - pair(x)).max(axis=-1)[0] > 1e-12
    expected = np.zeros((3, 4), dtype=bool)
    expected[1, :] = True
    expected[:, 2] = True
    np.testing.assert_array_equal(changed, expected)


def test_qk_norm_keeps_huge_inputs_finite_and_scale_free(float64):
    attn = randomize(Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS), RngState(seed=0)), 13)
    x = np.random.default_rng(12).standard_normal((2, 5, D))
    big = attn(Tensor(x * 1e6)).data
    bigger = attn(Tensor(x * 1e7)).data
    assert np.isfinite(big).all() and np.isfinite(bigger).all()
    np.testing.assert_allclose(bigger / 10.0, big, rtol=1e-4)


@pytest.mark.parametrize("copies", [2, 3])
def test_repeated_text_token_matches_a_single_token(float64, copies):
    attn = randomize(
        Attention(AttentionConfig(hidden_dim=D, n_heads=HEADS, context_dim=TEXT_DIM), RngState(seed=0)), 14
    )
    x = Tensor(np.random.default_rng(13).standard_normal((1, 2, 4, D)))
    token = np.random.default_rng(14).standard_normal((1, 1, TEXT_DIM))
    one = cross_attention(x, attn, Tensor(token)).data
    repeated = cross_attention(x, attn, Tensor(np.repeat(token, copies, axis=1))).data
    np.testing.assert_allclose(repeated, one, atol=1e-12)
