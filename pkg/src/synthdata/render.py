import numpy as np

from ..model import MicroConditions
from .schemas import Clip, ClipSpec

COLOR_RGB = {"red": (255, 0, 0), "green": (0, 255, 0), "blue": (0, 0, 255)}


def sprite(shape: str, size: int) -> np.ndarray:
    """Boolean [size, size] footprint of a hard-edged shape."""
    rows, cols = np.mgrid[0:size, 0:size]
    centre = (size - 1) / 2.0
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "circle":
        return (rows - centre) ** 2 + (cols - centre) ** 2 <= (size / 2.0) ** 2
    # apex-up triangle, one pixel wider per row
    return np.abs(cols - centre) < (rows + 1) / 2.0


def generate_clip(spec: ClipSpec) -> Clip:
    """Raster the sprite onto a black background, one translation step per frame."""
    pixels = np.zeros((spec.num_frames, spec.height, spec.width, 3), dtype=np.uint8)
    mask = sprite(spec.shape, spec.size)
    color = np.array(COLOR_RGB[spec.color], dtype=np.uint8)
    for frame, (row, col) in zip(pixels, spec.positions()):
        window = frame[row : row + spec.size, col : col + spec.size]
        window[mask] = color
    micro = MicroConditions(height=spec.height, width=spec.width, num_frames=spec.num_frames)
    return Clip(spec=spec, pixels=pixels, tokens=spec.caption, micro=micro)
