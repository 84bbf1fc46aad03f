"""AdaFactor and AdamW over named numpy parameters, plus global-norm clipping."""
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..constants import OptimizerKind
from ..exceptions import CheckpointException, ShapeMismatchException
from ..tensor import Tensor
from .schemas import OptimizerConfig


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float = 1.0) -> Tuple[List[np.ndarray], float]:
    """Scale all gradients by max_norm / g when their global L2 norm g exceeds max_norm."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm <= max_norm:
        return list(grads), norm
    scale = max_norm / norm
    return [g * scale for g in grads], norm


class Optimizer:
    slots: Tuple[str, ...] = ()

    def __init__(self, params: Sequence[Tuple[str, Tensor]], config: OptimizerConfig):
        self.params = list(params)
        self.config = config
        self.step_count = 0
        self.state: Dict[str, Dict[str, np.ndarray]] = {name: self._init_state(p.data) for name, p in self.params}

    def _init_state(self, value: np.ndarray) -> Dict[str, np.ndarray]:
        raise NotImplementedError

    def _update(self, state: Dict[str, np.ndarray], g: np.ndarray, t: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def lr(self) -> float:
        return self.config.lr_at(self.step_count)

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeMismatchException("optimizer step", (len(grads),), (len(self.params),))
        lr = self.lr
        t = self.step_count + 1
        for (name, p), g in zip(self.params, grads):
            g = np.asarray(g, dtype=np.float64)
            if g.shape != p.shape:
                raise ShapeMismatchException(f"optimizer step {name}", g.shape, p.shape)
            update = self._update(self.state[name], g, t)
            if self.config.weight_decay:
                update = update + self.config.weight_decay * p.data
            p.data = (p.data - lr * update).astype(p.dtype)
        self.step_count = t

    def state_dict(self) -> Dict[str, np.ndarray]:
        flat = {}
        for name, slots in self.state.items():
            for key, value in slots.items():
                flat[f"{name}:{key}"] = value.copy()
        return flat

    def load_state_dict(self, flat: Dict[str, np.ndarray], step_count: int) -> None:
        for name, slots in self.state.items():
            for key, value in slots.items():
                stored = flat.get(f"{name}:{key}")
                if stored is None or stored.shape != value.shape:
                    raise CheckpointException(f"optimizer state {name}:{key} missing or misshapen")
                slots[key] = np.array(stored, dtype=np.float64)
        self.step_count = step_count


class AdaFactor(Optimizer):
    """Factored second moments for matrices, full moments for vectors.

    Both moments carry bias correction; the update RMS is clipped at
    ``clip_threshold``; no relative step sizing.
    """

    def _init_state(self, value: np.ndarray) -> Dict[str, np.ndarray]:
        state = {"m": np.zeros(value.shape)}
        if value.ndim >= 2:
            state["vr"] = np.zeros(value.shape[:-1])
            state["vc"] = np.zeros(value.shape[-1:])
        else:
            state["v"] = np.zeros(value.shape)
        return state

    def _update(self, state: Dict[str, np.ndarray], g: np.ndarray, t: int) -> np.ndarray:
        c = self.config
        g2 = g * g
        if "vr" in state:
            state["vr"] = c.beta2 * state["vr"] + (1.0 - c.beta2) * g2.mean(axis=-1)
            state["vc"] = c.beta2 * state["vc"] + (1.0 - c.beta2) * g2.mean(axis=tuple(range(g.ndim - 1)))
            row_mean = state["vr"].mean()
            v = np.zeros(g.shape) if row_mean == 0.0 else state["vr"][..., None] * state["vc"] / row_mean
        else:
            state["v"] = c.beta2 * state["v"] + (1.0 - c.beta2) * g2
            v = state["v"]
        state["m"] = c.beta1 * state["m"] + (1.0 - c.beta1) * g
        m_hat = state["m"] / (1.0 - c.beta1 ** t)
        v_hat = v / (1.0 - c.beta2 ** t)
        update = m_hat / np.sqrt(v_hat + c.eps)
        rms = float(np.sqrt(np.mean(update * update))) if update.size else 0.0
        return update / max(1.0, rms / c.clip_threshold)


class AdamW(Optimizer):
    def _init_state(self, value: np.ndarray) -> Dict[str, np.ndarray]:
        return {"m": np.zeros(value.shape), "v": np.zeros(value.shape)}

    def _update(self, state: Dict[str, np.ndarray], g: np.ndarray, t: int) -> np.ndarray:
        c = self.config
        state["m"] = c.beta1 * state["m"] + (1.0 - c.beta1) * g
        state["v"] = c.beta2 * state["v"] + (1.0 - c.beta2) * g * g
        m_hat = state["m"] / (1.0 - c.beta1 ** t)
        v_hat = state["v"] / (1.0 - c.beta2 ** t)
        return m_hat / (np.sqrt(v_hat) + 1e-8)


def build_optimizer(params: Sequence[Tuple[str, Tensor]], config: OptimizerConfig) -> Optimizer:
    cls = AdaFactor if config.kind == OptimizerKind.ADAFACTOR else AdamW
    return cls(params, config)
