from itertools import product
from typing import Iterator, Sequence

import numpy as np

from ..constants import SAMPLER_DELTA, SIT_GRID_SCALES, GuidanceScheme
from ..exceptions import GuidanceException, ShapeMismatchException
from .schemas import GuidanceConfig


def _same_shape(op: str, *fields: np.ndarray) -> None:
    if len({f.shape for f in fields}) != 1:
        raise ShapeMismatchException(op, *[f.shape for f in fields])


def jit_cfg(f_null: np.ndarray, f_joint: np.ndarray, s: float) -> np.ndarray:
    """F_null + s (F_joint - F_null), evaluated as a weighted sum so s = 0 and s = 1 are exact."""
    _same_shape("jit_cfg", f_null, f_joint)
    return (1.0 - s) * f_null + s * f_joint


def sit_cfg(f_null: np.ndarray, f_img: np.ndarray, f_joint: np.ndarray, s1: float, s2: float) -> np.ndarray:
    """F_null + s1 (F_img - F_null) + s2 (F_joint - F_img)."""
    _same_shape("sit_cfg", f_null, f_img, f_joint)
    return (1.0 - s1) * f_null + (s1 - s2) * f_img + s2 * f_joint


def cfg_renorm(f_hat: np.ndarray, f_cond: np.ndarray) -> np.ndarray:
    """Rescale the guided field to the norm of the conditional one, keeping its direction."""
    _same_shape("cfg_renorm", f_hat, f_cond)
    norm = np.linalg.norm(f_hat)
    if norm == 0.0:
        return f_cond.copy()
    return f_hat * (np.linalg.norm(f_cond) / norm)


def velocity_to_score(f: np.ndarray, x_t: np.ndarray, t: float, delta: float = SAMPLER_DELTA) -> np.ndarray:
    if not 0.0 <= t <= 1.0 - delta:
        raise GuidanceException(f"score needs t in [0, {1.0 - delta}], got {t}")
    _same_shape("velocity_to_score", f, x_t)
    return (t / (1.0 - t)) * f - x_t / (1.0 - t)


def combine(guidance: GuidanceConfig, branches: Sequence[np.ndarray]) -> np.ndarray:
    """Branches are ordered (joint,), (null, joint) or (null, img, joint)."""
    if len(branches) != guidance.n_branches:
        raise GuidanceException(f"{guidance.scheme.value} needs {guidance.n_branches} branches, got {len(branches)}")
    if guidance.scheme == GuidanceScheme.NONE:
        guided = branches[0]
    elif guidance.scheme == GuidanceScheme.JIT:
        guided = jit_cfg(branches[0], branches[1], guidance.s)
    else:
        guided = sit_cfg(branches[0], branches[1], branches[2], guidance.s1, guidance.s2)
    if guidance.renorm and guidance.scheme != GuidanceScheme.NONE:
        guided = cfg_renorm(guided, branches[-1])
    return guided


def sit_grid(
    scales1: Sequence[float] = SIT_GRID_SCALES,
    scales2: Sequence[float] = SIT_GRID_SCALES,
    renorm: bool = False,
) -> Iterator[GuidanceConfig]:
    if not scales1 or not scales2:
        raise GuidanceException("grid search needs non-empty scale lists")
    for s1, s2 in product(sorted(scales1), sorted(scales2)):
        yield GuidanceConfig(scheme=GuidanceScheme.SIT, s1=s1, s2=s2, renorm=renorm)
