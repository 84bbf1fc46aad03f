"""Motion oracle: reads pixels only, never captions or model state."""
from collections import Counter

import numpy as np

from .schemas import MotionVerdict

STATIC_THRESHOLD = 0.1


def centroids(video: np.ndarray) -> np.ndarray:
    """Intensity-weighted (row, col) centroid of each non-black frame; [K, 2]."""
    intensity = np.asarray(video, dtype=np.float64).sum(axis=-1)
    mass = intensity.sum(axis=(1, 2))
    rows = np.arange(intensity.shape[1], dtype=np.float64)
    cols = np.arange(intensity.shape[2], dtype=np.float64)
    lit = mass > 0
    row_c = (intensity[lit].sum(axis=2) @ rows) / mass[lit]
    col_c = (intensity[lit].sum(axis=1) @ cols) / mass[lit]
    return np.stack([row_c, col_c], axis=-1)


def step_direction(d_row: float, d_col: float) -> str:
    if abs(d_col) >= abs(d_row):
        return "right" if d_col > 0 else "left"
    return "down" if d_row > 0 else "up"


def motion_oracle(video: np.ndarray) -> MotionVerdict:
    """Dominant direction, median speed (pixels/frame) and the fraction of steps agreeing."""
    points = centroids(video)
    if len(points) < 2:
        return MotionVerdict()
    steps = np.diff(points, axis=0)
    magnitudes = np.linalg.norm(steps, axis=-1)
    speed = float(np.median(magnitudes))
    if speed < STATIC_THRESHOLD:
        return MotionVerdict(speed=speed, confidence=1.0)
    votes = [step_direction(dr, dc) for dr, dc in steps]
    direction, count = Counter(votes).most_common(1)[0]
    return MotionVerdict(direction=direction, speed=speed, confidence=count / len(votes))
