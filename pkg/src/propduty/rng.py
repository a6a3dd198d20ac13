"""Counter-based uniform streams keyed by (seed, stream, block index).

Each block index owns one Philox4x64 output block of four 64-bit words, so a
block can be regenerated on its own and any partition of an index range gives
the same numbers as a single sequential pass.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1

# stream tags keep independent consumers from sharing blocks
TRIALS = 0
RANKING = 1
PROPERTY = 2

_WORDS_PER_BLOCK = 4
_TO_UNIT = 2.0**-53


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def _bitgen(seed: int, stream: int, start: int) -> np.random.Philox:
    key = check_seed(seed) | (stream << 64)
    return np.random.Philox(key=key, counter=start)


def blocks(seed: int, stream: int, start: int, stop: int) -> np.ndarray:
    """Uniform doubles in [0, 1) for blocks ``start..stop-1``, shape (stop-start, 4)."""
    if not 0 <= start <= stop:
        raise ValueError(f"bad block range [{start}, {stop})")
    raw = _bitgen(seed, stream, start).random_raw((stop - start) * _WORDS_PER_BLOCK)
    return ((raw >> np.uint64(11)).astype(np.float64) * _TO_UNIT).reshape(-1, _WORDS_PER_BLOCK)


def block(seed: int, stream: int, index: int) -> np.ndarray:
    return blocks(seed, stream, index, index + 1)[0]
