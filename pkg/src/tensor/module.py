from typing import Dict, Iterator, List, Tuple

import numpy as np

from ..exceptions import CheckpointException
from .rng import RngState
from .tensor import Tensor, parameter


class Module:
    """Parameter container; parameters are ``Tensor`` attributes with requires_grad."""

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> List[str]:
        """Copy arrays into matching parameters; returns the names left untouched."""
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise CheckpointException(
                    f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}"
                )
        untouched = []
        for name, p in own.items():
            if name not in state:
                untouched.append(name)
                continue
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise CheckpointException(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype, copy=True)
        return untouched

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: RngState, bias: bool = True, zero_init: bool = False):
        self.in_features = in_features
        self.out_features = out_features
        if zero_init:
            weight = np.zeros((in_features, out_features))
        else:
            limit = np.sqrt(6.0 / (in_features + out_features))
            weight = rng.generator().uniform(-limit, limit, size=(in_features, out_features))
        self.weight = parameter(weight)
        self.bias = parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        lead = x.shape[:-1]
        y = x.reshape(-1, self.in_features) @ self.weight
        if self.bias is not None:
            y = y + self.bias
        return y.reshape(*lead, self.out_features)
