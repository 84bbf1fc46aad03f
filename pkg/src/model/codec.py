"""Exactly invertible toy latent codec.

Each 2x2 pixel block of each colour channel becomes four latent channels
through the orthonormal Haar basis. The first band is twice the block average
(the average-pool), the other three are the block differences, so
``decode(encode(frames))`` reproduces the original bytes.
"""
import numpy as np

_HAAR = 0.5 * np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ]
)

PIXEL_CHANNELS = 3
LATENT_CHANNELS = 4 * PIXEL_CHANNELS
DOWNSAMPLE = 2


def encode(pixels: np.ndarray) -> np.ndarray:
    """uint8 [T, H, W, 3] -> float64 [T, H/2, W/2, 12]."""
    t, h, w, c = pixels.shape
    x = pixels.astype(np.float64) / 127.5 - 1.0
    blocks = x.reshape(t, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(t, h // 2, w // 2, c, 4)
    bands = blocks @ _HAAR.T
    return bands.reshape(t, h // 2, w // 2, c * 4)


def decode(latent: np.ndarray) -> np.ndarray:
    """float [T, h, w, 12] -> uint8 [T, 2h, 2w, 3], rounded and clipped."""
    t, h, w, _ = latent.shape
    bands = np.asarray(latent, dtype=np.float64).reshape(t, h, w, PIXEL_CHANNELS, 4)
    blocks = bands @ _HAAR
    x = blocks.reshape(t, h, w, PIXEL_CHANNELS, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(t, 2 * h, 2 * w, PIXEL_CHANNELS)
    return np.clip(np.rint((x + 1.0) * 127.5), 0, 255).astype(np.uint8)
