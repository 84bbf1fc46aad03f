from ..constants import MICRO_FIELDS, MODEL_PRESETS
from .schemas import StivConfig


def _linear(fan_in: int, fan_out: int, bias: bool = True) -> int:
    return fan_in * fan_out + (fan_out if bias else 0)


def _attention(dim: int, context_dim: int) -> int:
    # q, k, v, out projections plus per-head q/k RMS gains
    return 2 * _linear(dim, dim) + 2 * _linear(context_dim, dim) + 2 * dim


def count_block_parameters(config: StivConfig) -> int:
    d = config.hidden_dim
    sandwich = 2 * d
    total = sandwich + _attention(d, d)
    if config.temporal_attention:
        total += sandwich + _attention(d, d)
    total += sandwich + _attention(d, config.text_dim)
    total += sandwich + _linear(d, d * config.ffn_ratio) + _linear(d * config.ffn_ratio, d)
    return total


def count_parameters(config: StivConfig) -> int:
    """Analytic parameter count of ``StivModel(config)``; allocates nothing."""
    d = config.hidden_dim
    scalar_embedder = _linear(config.frequency_dim, d) + _linear(d, d)
    total = _linear(config.patch_dim, d)
    total += config.vocab_size * config.text_dim
    total += (1 + len(MICRO_FIELDS)) * scalar_embedder + _linear(config.text_dim, d)
    total += _linear(d, config.modulation_chunks * d)
    total += 2 * d  # pinned-frame label and mask token
    total += (config.n_blocks + config.n_decoder_blocks) * count_block_parameters(config)
    total += _linear(d, config.patch_dim)
    return total


def preset_report(spatial_only: bool = False) -> dict:
    """{preset: (counted, reported)} for the table configurations."""
    overrides = dict(temporal_attention=False, temporal_patch=1, latent_frames=1) if spatial_only else {}
    report = {}
    for name, (_, _, _, reported) in MODEL_PRESETS.items():
        report[name] = (count_parameters(StivConfig.preset(name, **overrides)), reported)
    return report
