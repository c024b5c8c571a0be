"""Token vocabulary and id-sequence vectorization."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..corpus import TokenStream
from ..errors import EmptyTrainingSetError

UNK_ID = 0
PAD_ID = 1


@dataclass(frozen=True)
class Vocabulary:
    """Dense token -> id map with ids 0 and 1 reserved for unk and pad."""

    token_to_id: dict[str, int]

    unk_id: int = UNK_ID
    pad_id: int = PAD_ID

    @property
    def size(self) -> int:
        return len(self.token_to_id) + 2

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)


def build_vocabulary(streams: Iterable[TokenStream], min_freq: int = 1) -> Vocabulary:
    """Build a vocabulary from training-fold token streams only.

    Tokens seen fewer than min_freq times fold to the unk id. Ids are
    assigned by descending frequency with alphabetic tiebreak so the
    mapping is deterministic.
    """
    streams = list(streams)
    if not streams:
        raise EmptyTrainingSetError("no token streams to build a vocabulary from")
    counts: Counter[str] = Counter()
    for stream in streams:
        counts.update(stream.tokens)
    kept = sorted(
        (t for t, n in counts.items() if n >= min_freq),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary(token_to_id={t: i + 2 for i, t in enumerate(kept)})


def vectorize(tokens: TokenStream, vocab: Vocabulary, max_seq_len: int) -> np.ndarray:
    """Map tokens to ids, truncate or pad to exactly max_seq_len."""
    ids = [vocab.lookup(t) for t in tokens.tokens[:max_seq_len]]
    if len(ids) < max_seq_len:
        ids.extend([PAD_ID] * (max_seq_len - len(ids)))
    return np.asarray(ids, dtype=np.int64)
