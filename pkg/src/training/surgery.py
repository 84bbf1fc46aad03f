"""Progressive initialisation: T2I -> T2V, low-res T2V + high-res T2I, short -> long clips.

Every function returns the new model and an audit map naming the source of
each of its parameters.
"""
from collections import Counter
from typing import Dict, List, Tuple

import numpy as np

from ..constants import Provenance, RopeMode
from ..exceptions import SurgeryException
from ..logger import logger
from ..model import StivConfig, StivModel
from ..tensor import RngState

Audit = Dict[str, Provenance]

# hyperparameters every source must share with the target
_SHARED_FIELDS = (
    "hidden_dim",
    "n_heads",
    "text_dim",
    "vocab_size",
    "ffn_ratio",
    "frequency_dim",
    "latent_channels",
    "spatial_patch",
    "n_blocks",
    "n_decoder_blocks",
)


def is_temporal(name: str) -> bool:
    return ".temporal_attn." in name or ".temporal_norm." in name


def _check_compatible(source: StivConfig, target: StivConfig, label: str) -> None:
    mismatched = [f for f in _SHARED_FIELDS if getattr(source, f) != getattr(target, f)]
    if mismatched:
        detail = ", ".join(f"{f}: {getattr(source, f)} vs {getattr(target, f)}" for f in mismatched)
        raise SurgeryException(f"{label} source incompatible with target ({detail})")


def _inflate(name: str, value: np.ndarray, source_pt: int, target_pt: int) -> np.ndarray:
    """Replicate cubify rows (divided by pt) or head columns across the temporal patch."""
    repeats = target_pt // source_pt
    if name == "cubify.weight":
        return np.concatenate([value] * repeats, axis=0) / repeats
    if name == "head.weight":
        return np.concatenate([value] * repeats, axis=1)
    return np.concatenate([value] * repeats, axis=0)


_INFLATED = ("cubify.weight", "head.weight", "head.bias")


def _transfer(
    target: StivModel,
    source: StivModel,
    names: List[str],
    tag: Provenance,
    inflated_tag: Provenance,
    audit: Audit,
) -> None:
    source_params = dict(source.named_parameters())
    target_params = dict(target.named_parameters())
    source_pt, target_pt = source.config.temporal_patch, target.config.temporal_patch
    errors = []
    for name in names:
        if name not in source_params:
            errors.append(f"{name}: missing from source")
            continue
        value = source_params[name].data
        p = target_params[name]
        provenance = tag
        if name in _INFLATED and source_pt != target_pt:
            value = _inflate(name, value, source_pt, target_pt)
            provenance = inflated_tag
        elif name == "adaln.proj.weight" and value.shape != p.shape:
            # extra temporal modulation chunks start at zero
            value = np.concatenate([value, np.zeros((value.shape[0], p.shape[1] - value.shape[1]))], axis=1)
            provenance = inflated_tag
        elif name == "adaln.proj.bias" and value.shape != p.shape:
            value = np.concatenate([value, np.zeros(p.shape[0] - value.shape[0])])
            provenance = inflated_tag
        if value.shape != p.shape:
            errors.append(f"{name}: {value.shape} vs {p.shape}")
            continue
        p.data = value.astype(p.dtype, copy=True)
        audit[name] = provenance
    if errors:
        raise SurgeryException("incompatible tensors: " + "; ".join(errors))


def _fresh(config: StivConfig, seed: int) -> Tuple[StivModel, Audit]:
    model = StivModel(config, RngState(seed=seed))
    return model, {name: Provenance.INIT for name, _ in model.named_parameters()}


def _check_patch(source: StivConfig, target: StivConfig) -> None:
    if target.temporal_patch % source.temporal_patch:
        raise SurgeryException(
            f"temporal patch {source.temporal_patch} cannot inflate to {target.temporal_patch}"
        )
    if source.modulation_chunks > target.modulation_chunks:
        raise SurgeryException("source has temporal modulation the target lacks")


def init_t2v_from_t2i(t2i: StivModel, config: StivConfig, seed: int = 0) -> Tuple[StivModel, Audit]:
    """Copy every T2I tensor, inflate cubify/head over the temporal patch, keep temporal attention fresh."""
    _check_compatible(t2i.config, config, "t2i")
    _check_patch(t2i.config, config)
    if not config.temporal_attention:
        raise SurgeryException("target config has no temporal attention")
    model, audit = _fresh(config, seed)
    names = [name for name, _ in model.named_parameters() if not is_temporal(name)]
    _transfer(model, t2i, names, Provenance.T2I, Provenance.T2I_INFLATED, audit)
    log_audit("t2i->t2v", audit)
    return model, audit


def init_from_both(
    t2v: StivModel, t2i: StivModel, config: StivConfig, seed: int = 0
) -> Tuple[StivModel, Audit]:
    """Temporal weights from the low-resolution T2V model, everything else from the T2I model.

    The spatial RoPE position scale becomes old grid / new grid so the larger
    grid interpolates the positions the T2V model was trained on.
    """
    _check_compatible(t2v.config, config, "t2v")
    _check_compatible(t2i.config, config, "t2i")
    _check_patch(t2i.config, config)
    if t2v.config.temporal_patch != config.temporal_patch or not t2v.config.temporal_attention:
        raise SurgeryException("t2v source must carry temporal attention with the target temporal patch")
    ratio = t2v.config.grid[0] / config.grid[0]
    config = config.model_copy(update={"spatial_rope_scale": ratio})
    model, audit = _fresh(config, seed)
    names = [name for name, _ in model.named_parameters()]
    _transfer(model, t2i, [n for n in names if not is_temporal(n)], Provenance.T2I, Provenance.T2I_INFLATED, audit)
    _transfer(model, t2v, [n for n in names if is_temporal(n)], Provenance.T2V, Provenance.T2V, audit)
    log_audit("t2v+t2i", audit)
    return model, audit


def extend_frames_init(
    short: StivModel, new_frames: int, rope_mode: RopeMode = RopeMode.INTERPOLATE, seed: int = 0
) -> Tuple[StivModel, Audit]:
    old_frames = short.config.latent_frames
    if new_frames < old_frames:
        raise SurgeryException(f"cannot shorten clips from {old_frames} to {new_frames} frames")
    scale = short.config.temporal_rope_scale
    if RopeMode(rope_mode) == RopeMode.INTERPOLATE:
        scale *= old_frames / new_frames
    config = short.config.model_copy(update={"latent_frames": new_frames, "temporal_rope_scale": scale})
    model, audit = _fresh(config, seed)
    _transfer(model, short, list(audit), Provenance.SHORT, Provenance.SHORT, audit)
    log_audit(f"extend {old_frames}->{new_frames} ({RopeMode(rope_mode).value})", audit)
    return model, audit


def log_audit(label: str, audit: Audit) -> None:
    counts = Counter(p.value for p in audit.values())
    logger.bind(surgery=label).info(", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
