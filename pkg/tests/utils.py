from typing import Callable, Optional, Tuple

import numpy as np

from src.model import Condition, ConditionBatch, MicroConditions, StivConfig, condition_batch, vocabulary
from src.tensor import Module, Tensor, get_default_dtype


def randomize(module: Module, seed: int, scale: float = 0.3) -> Module:
    """Give every parameter random values so zero-initialised paths carry signal."""
    generator = np.random.default_rng(seed)
    for name, p in module.named_parameters():
        noise = generator.standard_normal(p.shape) * scale
        base = 1.0 if name.endswith("gain") else 0.0
        p.data = (base + noise).astype(p.dtype)
    return module


def random_batch(
    config: StivConfig, batch_size: int = 2, seed: int = 0, frames: Optional[int] = None, pinned: bool = True
) -> Tuple[Tensor, np.ndarray, ConditionBatch]:
    generator = np.random.default_rng(seed)
    frames = frames or config.latent_frames
    shape = (batch_size, frames, config.latent_height, config.latent_width, config.latent_channels)
    x = Tensor(generator.standard_normal(shape), dtype=get_default_dtype())
    t = generator.uniform(0.05, 0.95, size=batch_size)
    captions = [["a", "red", "square", "moves", "left", "slowly"], ["a", "blue", "circle"]]
    conditions = [
        Condition(text=vocabulary.condition(captions[i % 2]) if i % 3 != 2 else None) for i in range(batch_size)
    ]
    micro = [
        MicroConditions(height=32, width=32, sampling_stride=1 + i, num_frames=frames) for i in range(batch_size)
    ]
    batch = condition_batch(conditions, micro, frames)
    if pinned:
        flags = np.zeros((batch_size, frames), dtype=bool)
        flags[0, 0] = True
        batch = batch.model_copy(update={"pinned": flags})
    return x, t, batch


def check_gradient(
    loss: Callable[[], Tensor],
    param: Tensor,
    analytic: np.ndarray,
    seed: int = 0,
    n_entries: int = 6,
    eps: float = 1e-5,
) -> float:
    """Relative error between ``analytic`` and central differences on a few entries of ``param``.

    Gradients with a norm below 1e-4 are compared on an absolute scale.
    """
    generator = np.random.default_rng(seed)
    flat = param.data.reshape(-1)
    picks = generator.choice(flat.size, size=min(n_entries, flat.size), replace=False)
    numeric, exact = [], []
    for i in picks:
        original = flat[i]
        flat[i] = original + eps
        up = loss().item()
        flat[i] = original - eps
        down = loss().item()
        flat[i] = original
        numeric.append((up - down) / (2 * eps))
        exact.append(analytic.reshape(-1)[i])
    numeric, exact = np.array(numeric), np.array(exact)
    return float(np.linalg.norm(numeric - exact) / max(np.linalg.norm(numeric) + np.linalg.norm(exact), 1e-4))


def promote(tensors) -> None:
    """Store ``tensors`` in float64 in place so finite differences of a float32 graph are not rounding-bound."""
    for tensor in tensors:
        tensor.data = tensor.data.astype(np.float64)
