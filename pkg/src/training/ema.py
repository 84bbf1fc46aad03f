from typing import Iterable, Tuple

import numpy as np

from ..exceptions import ShapeMismatchException
from ..tensor import Module, Tensor
from .schemas import EmaState


def ema_init(model: Module, decay: float) -> EmaState:
    return EmaState(decay=decay, shadow={k: v.astype(np.float64) for k, v in model.state_dict().items()})


def ema_update(ema: EmaState, params: Iterable[Tuple[str, Tensor]]) -> EmaState:
    """shadow <- decay * shadow + (1 - decay) * params, in place."""
    for name, p in params:
        shadow = ema.shadow[name]
        if shadow.shape != p.shape:
            raise ShapeMismatchException(f"ema {name}", shadow.shape, p.shape)
        ema.shadow[name] = ema.decay * shadow + (1.0 - ema.decay) * p.data
    return ema


def ema_copy_to(ema: EmaState, model: Module) -> None:
    """Load the shadow weights into ``model`` (the weights used for sampling and evaluation)."""
    model.load_state_dict(ema.shadow)
