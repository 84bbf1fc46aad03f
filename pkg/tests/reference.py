"""Straight-line numpy forward of the STIV network, written against parameter names only."""
from typing import Dict, Optional

import numpy as np

EPS = 1e-6


def linear(p: Dict[str, np.ndarray], name: str, x: np.ndarray) -> np.ndarray:
    y = x @ p[f"{name}.weight"]
    bias = p.get(f"{name}.bias")
    return y if bias is None else y + bias


def layer_norm(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean(axis=-1, keepdims=True)
    return centered / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + EPS)


def rms_norm(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt((x ** 2).mean(axis=-1, keepdims=True) + EPS)


def silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x ** 3)))


def softmax(z: np.ndarray, allowed: Optional[np.ndarray]) -> np.ndarray:
    if allowed is not None:
        z = np.where(allowed, z, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def timestep_features(values: np.ndarray, dim: int) -> np.ndarray:
    half = dim // 2
    out = np.zeros((len(values), dim))
    for k in range(half):
        freq = np.exp(-np.log(10000.0) * k / half)
        out[:, k] = np.cos(values * freq)
        out[:, half + k] = np.sin(values * freq)
    return out


def rope_angles(positions: np.ndarray, head_dim: int, base: float, scale: float) -> np.ndarray:
    """Angles per (position, rotation pair); 2D positions split the pairs between rows and columns."""
    positions = np.asarray(positions, dtype=np.float64) * scale
    if positions.ndim == 1:
        inv = np.array([base ** (-2.0 * j / head_dim) for j in range(head_dim // 2)])
        return positions[:, None] * inv[None]
    half = head_dim // 2
    inv = np.array([base ** (-2.0 * j / half) for j in range(half // 2)])
    return np.concatenate([positions[:, :1] * inv[None], positions[:, 1:2] * inv[None]], axis=-1)


def rotate(x: np.ndarray, angles: np.ndarray) -> np.ndarray:
    pairs = x[..., 0::2] + 1j * x[..., 1::2]
    turned = pairs * np.exp(1j * angles)
    out = np.empty_like(x)
    out[..., 0::2] = turned.real
    out[..., 1::2] = turned.imag
    return out


def attention(p, name, x, context, heads, angles=None, allowed=None):
    """x: [N, L, D], context: [N, M, Dc]."""
    n, length, dim = x.shape
    hd = dim // heads

    def split(y):
        return y.reshape(n, -1, heads, hd).transpose(0, 2, 1, 3)

    q = split(linear(p, f"{name}.q_proj", x))
    k = split(linear(p, f"{name}.k_proj", context))
    v = split(linear(p, f"{name}.v_proj", context))
    q = rms_norm(q) * p[f"{name}.q_gain"][None, :, None, :]
    k = rms_norm(k) * p[f"{name}.k_gain"][None, :, None, :]
    if angles is not None:
        q, k = rotate(q, angles), rotate(k, angles)
    weights = softmax(q @ k.transpose(0, 1, 3, 2) / np.sqrt(hd), allowed)
    out = (weights @ v).transpose(0, 2, 1, 3).reshape(n, length, dim)
    return linear(p, f"{name}.out_proj", out)


def sandwich(p, name, x, inner, shift=0.0, scale=1.0, gate=1.0):
    h = layer_norm(x) * p[f"{name}.pre_gain"] * scale + shift
    return x + layer_norm(inner(h)) * p[f"{name}.post_gain"] * gate


def block(p, name, x, mods, text, text_mask, config, spatial_pos, temporal_pos):
    b, t, s, d = x.shape
    heads = config.n_heads
    (s_shift, s_scale, s_gate), (f_shift, f_scale, f_gate), temporal_mod = mods
    spatial_angles = rope_angles(spatial_pos, d // heads, config.rope_base, config.spatial_rope_scale)
    temporal_angles = rope_angles(temporal_pos, d // heads, config.rope_base, config.temporal_rope_scale)

    def spatial(h):
        flat = h.reshape(b * t, s, d)
        return attention(p, f"{name}.spatial_attn", flat, flat, heads, spatial_angles).reshape(b, t, s, d)

    def temporal(h):
        flat = h.transpose(0, 2, 1, 3).reshape(b * s, t, d)
        allowed = np.tril(np.ones((t, t), dtype=bool)) if config.causal_temporal else None
        out = attention(p, f"{name}.temporal_attn", flat, flat, heads, temporal_angles, allowed)
        return out.reshape(b, s, t, d).transpose(0, 2, 1, 3)

    def cross(h):
        flat = h.reshape(b, t * s, d)
        allowed = text_mask[:, None, None, :]
        return attention(p, f"{name}.cross_attn", flat, text, heads, None, allowed).reshape(b, t, s, d)

    def ffn(h):
        return linear(p, f"{name}.ffn.fc2", gelu(linear(p, f"{name}.ffn.fc1", h)))

    x = sandwich(p, f"{name}.spatial_norm", x, spatial, s_shift, s_scale, s_gate)
    if f"{name}.temporal_attn.q_proj.weight" in p:
        if temporal_mod is None:
            x = sandwich(p, f"{name}.temporal_norm", x, temporal)
        else:
            x = sandwich(p, f"{name}.temporal_norm", x, temporal, *temporal_mod)
    x = sandwich(p, f"{name}.cross_norm", x, cross)
    return sandwich(p, f"{name}.ffn_norm", x, ffn, f_shift, f_scale, f_gate)


def reference_forward(p, config, x, t, text_ids, text_mask, micro, pinned):
    """Unmasked velocity for x [B, T, H, W, C]."""
    x = np.asarray(x, dtype=np.float64)
    b, frames, height, width, channels = x.shape
    ps, pt, d = config.spatial_patch, config.temporal_patch, config.hidden_dim
    while x.shape[1] % pt:
        x = np.concatenate([x, x[:, -1:]], axis=1)
        pinned = np.concatenate([pinned, pinned[:, -1:]], axis=1)
    slots, gh, gw = x.shape[1] // pt, height // ps, width // ps

    patches = np.zeros((b, slots, gh * gw, pt * ps * ps * channels))
    for n in range(b):
        for k in range(slots):
            for i in range(gh):
                for j in range(gw):
                    cube = x[n, k * pt : (k + 1) * pt, i * ps : (i + 1) * ps, j * ps : (j + 1) * ps]
                    patches[n, k, i * gw + j] = cube.reshape(-1)
    tokens = linear(p, "cubify", patches)
    slot_pinned = pinned.reshape(b, slots, pt).any(axis=-1)
    tokens = tokens + slot_pinned[:, :, None, None] * p["pinned_embed"]

    embeddings = p["text_encoder.embedding"][text_ids]
    last = text_mask.sum(axis=1) - 1
    pooled = embeddings[np.arange(b), last]

    def scalar(name, values):
        h = linear(p, f"{name}.fc1", timestep_features(values, config.frequency_dim))
        return layer_norm(linear(p, f"{name}.fc2", silu(h)))

    singleton = scalar("conditioner.timestep", 1000.0 * np.asarray(t, dtype=np.float64))
    for i in range(micro.shape[1]):
        singleton = singleton + scalar(f"conditioner.micro.{i}", micro[:, i])
    singleton = singleton + layer_norm(linear(p, "conditioner.text_proj", pooled))

    chunks = config.modulation_chunks
    raw = linear(p, "adaln.proj", silu(singleton)).reshape(b, 1, 1, chunks, d)
    triples = [(raw[..., i, :], raw[..., i + 1, :] + 1.0, raw[..., i + 2, :]) for i in range(0, chunks, 3)]
    mods = (triples[0], triples[1], triples[2] if chunks == 9 else None)

    rows, cols = np.meshgrid(np.arange(gh), np.arange(gw), indexing="ij")
    spatial_pos = np.stack([rows.reshape(-1), cols.reshape(-1)], axis=-1)
    temporal_pos = np.arange(slots)
    names = [f"blocks.{i}" for i in range(config.n_blocks)]
    names += [f"decoder_blocks.{i}" for i in range(config.n_decoder_blocks)]
    for name in names:
        tokens = block(p, name, tokens, mods, embeddings, text_mask, config, spatial_pos, temporal_pos)

    out = linear(p, "head", layer_norm(tokens))
    velocity = np.zeros_like(x)
    for n in range(b):
        for k in range(slots):
            for i in range(gh):
                for j in range(gw):
                    cube = out[n, k, i * gw + j].reshape(pt, ps, ps, channels)
                    velocity[n, k * pt : (k + 1) * pt, i * ps : (i + 1) * ps, j * ps : (j + 1) * ps] = cube
    return velocity[:, :frames]
