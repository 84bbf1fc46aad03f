import numpy as np

from ..blocks import BlockModulation, Modulation, stateless_layer_norm
from ..constants import MICRO_FIELDS, TIMESTEP_SCALE
from ..tensor import Linear, Module, RngState, Tensor, ops


def sinusoidal(values: np.ndarray, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """[N] scalars -> [N, dim] cos/sin features."""
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half, dtype=np.float64) / half)
    args = np.asarray(values, dtype=np.float64)[:, None] * freqs[None]
    features = np.concatenate([np.cos(args), np.sin(args)], axis=-1)
    if dim % 2:
        features = np.concatenate([features, np.zeros_like(features[:, :1])], axis=-1)
    return features


class ScalarEmbedder(Module):
    """Sinusoidal features of one scalar followed by a two-layer SiLU MLP."""

    def __init__(self, frequency_dim: int, hidden_dim: int, rng: RngState):
        self.frequency_dim = frequency_dim
        self.fc1 = Linear(frequency_dim, hidden_dim, rng)
        self.fc2 = Linear(hidden_dim, hidden_dim, rng)

    def forward(self, values: np.ndarray) -> Tensor:
        features = Tensor(sinusoidal(values, self.frequency_dim), dtype=self.fc1.weight.dtype)
        return self.fc2(ops.silu(self.fc1(features)))


class SingletonConditioner(Module):
    """Timestep, micro conditions and pooled text, each layer-normed, summed."""

    def __init__(self, frequency_dim: int, hidden_dim: int, text_dim: int, rng: RngState):
        self.timestep = ScalarEmbedder(frequency_dim, hidden_dim, rng)
        self.micro = [ScalarEmbedder(frequency_dim, hidden_dim, rng) for _ in MICRO_FIELDS]
        self.text_proj = Linear(text_dim, hidden_dim, rng)

    def terms(self, t: np.ndarray, micro: np.ndarray, pooled_text: Tensor) -> list:
        terms = [self.timestep(TIMESTEP_SCALE * np.asarray(t, dtype=np.float64))]
        terms += [embedder(micro[:, i]) for i, embedder in enumerate(self.micro)]
        terms.append(self.text_proj(pooled_text))
        return [stateless_layer_norm(term) for term in terms]

    def forward(self, t: np.ndarray, micro: np.ndarray, pooled_text: Tensor) -> Tensor:
        total = None
        for term in self.terms(t, micro, pooled_text):
            total = term if total is None else total + term
        return total


class SharedAdaLN(Module):
    """One projection from the singleton condition to every block's scale-shift-gate."""

    def __init__(self, hidden_dim: int, chunks: int, rng: RngState):
        self.hidden_dim = hidden_dim
        self.chunks = chunks
        self.proj = Linear(hidden_dim, chunks * hidden_dim, rng, zero_init=True)

    def forward(self, condition: Tensor) -> BlockModulation:
        b = condition.shape[0]
        raw = self.proj(ops.silu(condition)).reshape(b, 1, 1, self.chunks, self.hidden_dim)
        parts = [raw[:, :, :, i] for i in range(self.chunks)]
        triples = [Modulation(shift=parts[i], scale=parts[i + 1] + 1.0, gate=parts[i + 2]) for i in range(0, self.chunks, 3)]
        if len(triples) == 3:
            return BlockModulation(spatial=triples[0], ffn=triples[1], temporal=triples[2])
        return BlockModulation(spatial=triples[0], ffn=triples[1])
