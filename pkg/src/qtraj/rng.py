"""Counter-based random streams for reproducible, order-independent sampling.

Every source of randomness in the toolkit is addressed by a (seed, words...)
tuple mapped onto an independent Philox stream.  Streams are pure functions of
their address: the same address always yields the identical sequence, any two
distinct addresses yield independent sequences, and no global state is
involved, so parallel workers can draw from disjoint addresses without
coordination.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Address-word tags, so different subsystems never collide on a stream.
TAG_IID = 0x1D
TAG_MARKOV_INIT = 0x2A
TAG_MARKOV_FWD = 0x2B
TAG_MARKOV_BWD = 0x2C
TAG_TRAJECTORY = 0x3C
TAG_ENV_DRAW = 0x4E
TAG_COUPLING = 0x5F
TAG_BETA = 0x6A
TAG_GENERIC = 0x7E


def substream(seed: int, *words: int) -> np.random.Generator:
    """Independent Philox stream addressed by (seed, words).

    The words are placed in the high counter words of the Philox block, so
    distinct addresses produce non-overlapping streams.  At most three words
    are supported; negative words are mapped through two's complement.
    """
    if len(words) > 3:
        raise ValueError("at most three address words are supported")
    counter = np.zeros(4, dtype=np.uint64)
    for i, w in enumerate(words):
        counter[i + 1] = np.uint64(int(w) & _MASK64)
    bitgen = np.random.Philox(key=np.uint64(int(seed) & _MASK64), counter=counter)
    return np.random.Generator(bitgen)


def derive_seed(seed: int, *words: int) -> int:
    """Derive a child 64-bit seed from (seed, words), deterministically."""
    return int(substream(seed, *words).integers(0, 1 << 63))
