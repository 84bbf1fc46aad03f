import os

os.environ.setdefault("MODE", "TEST")
os.environ.setdefault("LOG_LEVEL", "WARNING")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from src.model import StivConfig  # noqa: E402
from src.tensor import RngState, default_dtype  # noqa: E402


@pytest.fixture
def float64():
    with default_dtype(np.float64):
        yield


@pytest.fixture
def rng() -> RngState:
    return RngState(seed=1234)


@pytest.fixture
def tiny_config() -> StivConfig:
    return StivConfig(
        n_blocks=1,
        hidden_dim=16,
        n_heads=2,
        text_dim=8,
        frequency_dim=8,
        latent_frames=4,
        latent_height=4,
        latent_width=4,
        temporal_patch=2,
        n_decoder_blocks=1,
    )
