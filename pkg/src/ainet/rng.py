"""Named random substreams derived from one 64-bit run seed.

Every stochastic step (parameter init, epoch shuffles, per-bag synthesis,
fold assignment, class signatures) draws from its own counter-based
Philox stream keyed by (seed, stream id, index), so streams never
interact and per-bag generation is order-independent.
"""

import numpy as np

STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_BAG = 3
STREAM_SIGNATURE = 4
STREAM_FOLD = 5

_MASK64 = (1 << 64) - 1
_MASK48 = (1 << 48) - 1


def substream(seed, stream, index=0):
    """Generator for the given (seed, stream, index) triple."""
    key = np.array(
        [seed & _MASK64, ((stream & 0xFFFF) << 48) | (index & _MASK48)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
