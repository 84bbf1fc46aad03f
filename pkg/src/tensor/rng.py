from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field

from .tensor import Tensor, get_default_dtype

_MASK64 = (1 << 64) - 1


class RngState(BaseModel):
    """Counter-based random state.

    Each stochastic operation takes one counter value; the draw itself comes
    from a Philox stream keyed by ``seed`` with that counter in the high word,
    so streams of different operations never overlap.
    """

    seed: int = Field(ge=0, le=_MASK64)
    counter: int = Field(0, ge=0, le=_MASK64)

    def generator(self) -> np.random.Generator:
        bit_generator = np.random.Philox(key=self.seed, counter=self.counter << 192)
        self.counter += 1
        return np.random.Generator(bit_generator)

    def spawn(self, key: int) -> "RngState":
        seed = np.random.SeedSequence([self.seed, self.counter, key]).generate_state(1, np.uint64)[0]
        return RngState(seed=int(seed))

    def copy_state(self) -> "RngState":
        return RngState(seed=self.seed, counter=self.counter)


def gaussian(rng: RngState, shape: Sequence[int], dtype=None) -> Tensor:
    draws = rng.generator().standard_normal(tuple(shape))
    return Tensor(draws, dtype=dtype or get_default_dtype())


def uniform(rng: RngState, shape: Sequence[int], low: float = 0.0, high: float = 1.0) -> np.ndarray:
    return rng.generator().uniform(low, high, size=tuple(shape))


def permutation(rng: RngState, n: int) -> np.ndarray:
    return rng.generator().permutation(n)
