from typing import List, Sequence, Tuple

import numpy as np

from ..constants import NULL_TOKEN, PAD_TOKEN, VOCABULARY
from ..exceptions import UnknownTokenException
from ..tensor import Module, RngState, Tensor, ops, parameter
from .schemas import TextCondition


class Vocabulary:
    def __init__(self, tokens: Sequence[str] = VOCABULARY):
        self.tokens = tuple(tokens)
        self.index = {token: i for i, token in enumerate(self.tokens)}

    @property
    def pad_id(self) -> int:
        return self.index[PAD_TOKEN]

    @property
    def null_id(self) -> int:
        return self.index[NULL_TOKEN]

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, words: Sequence[str]) -> List[int]:
        ids = []
        for word in words:
            if word not in self.index:
                raise UnknownTokenException(word)
            ids.append(self.index[word])
        return ids

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.tokens[i] for i in ids]

    def condition(self, words: Sequence[str]) -> TextCondition:
        return TextCondition(token_ids=self.encode(words))


vocabulary = Vocabulary()


class TextEncoder(Module):
    """Learned token table; the pooled vector is the embedding of the last real token."""

    def __init__(self, vocab_size: int, text_dim: int, rng: RngState):
        self.embedding = parameter(rng.generator().normal(0.0, 1.0, size=(vocab_size, text_dim)))

    def forward(self, ids: np.ndarray, mask: np.ndarray) -> Tuple[Tensor, Tensor]:
        embeddings = ops.getitem(self.embedding, ids)
        last = mask.sum(axis=1) - 1
        pooled = ops.getitem(embeddings, (np.arange(ids.shape[0]), last))
        return embeddings, pooled
